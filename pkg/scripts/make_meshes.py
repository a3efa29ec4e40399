#!/usr/bin/env python3
"""Write the built-in mesh corpus to OFF/OBJ files.

Usage: python scripts/make_meshes.py [out_dir]
"""

import os
import sys

from surfhodge import meshes
from surfhodge.mesh import analyze_topology, save_obj, save_off


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "out/meshes"
    os.makedirs(out_dir, exist_ok=True)
    for name, mesh in meshes.corpus().items():
        topo = analyze_topology(mesh)
        off = os.path.join(out_dir, f"{name}.off")
        obj = os.path.join(out_dir, f"{name}.obj")
        save_off(mesh, off)
        save_obj(mesh, obj)
        print(f"{name:14s} V={topo.n_vertices:4d} T={topo.n_triangles:4d} "
              f"b1={topo.b1}  -> {off}, {obj}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
