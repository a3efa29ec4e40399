"""Assembly of global sparse operators on surface triangulations.

All triangles are affine, so volume integrands reduce to reference
tabulations combined with per-element geometry factors; those contractions
are batched over the whole mesh with einsum.  Edge (DG) terms loop over
edges in Python with small dense kernels per edge.

Matrix convention: A[a, b] = form(trial phi_b, test phi_a), so A @ u gives
the residual against the test basis.

Quadrature: triangle rules of exactness 2*degree+3 and edge rules of
exactness 2*degree+2 make every bilinear form exact on affine elements; the
trilinear convection form uses rules of exactness >= 3*degree so that its
discrete energy identity holds to rounding error.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import DegreeMismatch, NonpositiveParameter, NotDivergenceFree
from .fespace import FeField, FeSpace, edge_ref_points, scalar_monomials
from .quadrature import edge_rule, triangle_rule


# ------------------------------------------------------------- tabulations
def volume_rule(space: FeSpace, extra: int = 0):
    return triangle_rule(2 * space.degree + 3 + extra)


def tabulate_scalar(space: FeSpace, rule):
    """Reference values (n_loc, n_q) and physical tangential gradients
    (T, n_loc, n_q, 3)."""
    xy = rule.xy
    vals = space.ref.eval(xy)
    grads = np.einsum("tid,lqd->tlqi", space.mesh.G, space.ref.grad(xy))
    return vals, grads


def tabulate_vector(space: FeSpace, rule, grads: bool = False):
    """Physical values (T, n_loc, n_q, 3), divergences (T, n_loc, n_q) and
    optionally ambient gradients (T, n_loc, n_q, 3, 3)."""
    mesh = space.mesh
    xy = rule.xy
    ref_vals = space.ref.eval(xy)
    piola = mesh.F / mesh.Jdet[:, None, None]
    vals = np.einsum("tic,lqc->tlqi", piola, ref_vals)
    divs = space.ref.div(xy)[None, :, :] / mesh.Jdet[:, None, None]
    if not grads:
        return vals, divs, None
    g = np.einsum("tia,lqab,tjb->tlqij", piola, space.ref.grad(xy), mesh.G)
    return vals, divs, g


def tabulate_field(field: FeField, rule) -> np.ndarray:
    """Field values at the rule's points on every triangle:
    (T, n_q, 3) for vector fields, (T, n_q) for scalar fields."""
    space = field.space
    loc = space.local_coefficients(field.coefficients)
    if space.value_shape == "scalar":
        vals = space.ref.eval(rule.xy)
        return np.einsum("tl,lq->tq", loc, vals)
    vals, _, _ = tabulate_vector(space, rule)
    return np.einsum("tl,tlqi->tqi", loc, vals)


def physical_points(mesh, rule) -> np.ndarray:
    """Quadrature point positions (T, n_q, 3)."""
    p0 = mesh.vertices[mesh.triangles[:, 0]]
    return p0[:, None, :] + np.einsum("tid,qd->tqi", mesh.F, rule.xy)


def _scatter(local: np.ndarray, rows_map, rows_signs, cols_map, cols_signs, shape):
    """Accumulate per-element dense blocks into a CSR matrix.

    local is (T, n_rows_loc, n_cols_loc); entries with a constrained-out
    (-1) dof are dropped; duplicates are summed.
    """
    T, nr, nc = local.shape
    vals = local * rows_signs[:, :, None] * cols_signs[:, None, :]
    rows = np.broadcast_to(rows_map[:, :, None], (T, nr, nc)).ravel()
    cols = np.broadcast_to(cols_map[:, None, :], (T, nr, nc)).ravel()
    data = vals.ravel()
    keep = (rows >= 0) & (cols >= 0)
    A = sp.coo_matrix((data[keep], (rows[keep], cols[keep])), shape=shape)
    return A.tocsr()


def _scatter_vec(local: np.ndarray, dof_map, signs, n):
    T, nl = local.shape
    data = (local * signs).ravel()
    rows = dof_map.ravel()
    keep = rows >= 0
    out = np.zeros(n)
    np.add.at(out, rows[keep], data[keep])
    return out


# ------------------------------------------------------------------ volume
def assemble_mass(space: FeSpace) -> sp.csr_matrix:
    """L2 Gram matrix of the space's global basis (SPD)."""
    rule = volume_rule(space)
    mesh = space.mesh
    if space.value_shape == "scalar":
        vals, _ = tabulate_scalar(space, rule)
        block = np.einsum("lq,mq,q->lm", vals, vals, rule.weights)
        local = block[None, :, :] * mesh.Jdet[:, None, None]
    else:
        vals, _, _ = tabulate_vector(space, rule)
        local = np.einsum("tlqi,tmqi,q->tlm", vals, vals, rule.weights) * mesh.Jdet[:, None, None]
    A = _scatter(local, space.dof_map, space.dof_signs, space.dof_map, space.dof_signs,
                 (space.total_dofs, space.total_dofs))
    return (A + A.T) * 0.5


def assemble_cross_mass(rows: FeSpace, cols: FeSpace) -> sp.csr_matrix:
    """Rectangular L2 pairing between two spaces of the same value shape."""
    if rows.value_shape != cols.value_shape:
        raise DegreeMismatch("cross mass requires matching value shapes")
    if rows.mesh is not cols.mesh:
        raise DegreeMismatch("cross mass requires a common mesh")
    rule = triangle_rule(rows.degree + cols.degree + 3)
    mesh = rows.mesh
    if rows.value_shape == "scalar":
        rv, _ = tabulate_scalar(rows, rule)
        cv, _ = tabulate_scalar(cols, rule)
        block = np.einsum("lq,mq,q->lm", rv, cv, rule.weights)
        local = block[None, :, :] * mesh.Jdet[:, None, None]
    else:
        rv, _, _ = tabulate_vector(rows, rule)
        cv, _, _ = tabulate_vector(cols, rule)
        local = np.einsum("tlqi,tmqi,q->tlm", rv, cv, rule.weights) * mesh.Jdet[:, None, None]
    return _scatter(local, rows.dof_map, rows.dof_signs, cols.dof_map, cols.dof_signs,
                    (rows.total_dofs, cols.total_dofs))


def assemble_broken_stiffness(space: FeSpace) -> sp.csr_matrix:
    """Elementwise grad-grad matrix for scalar spaces (broken for CR/DG)."""
    rule = volume_rule(space)
    mesh = space.mesh
    _, grads = tabulate_scalar(space, rule)
    local = np.einsum("tlqi,tmqi,q->tlm", grads, grads, rule.weights) * mesh.Jdet[:, None, None]
    A = _scatter(local, space.dof_map, space.dof_signs, space.dof_map, space.dof_signs,
                 (space.total_dofs, space.total_dofs))
    return (A + A.T) * 0.5


def assemble_div(V: FeSpace, Q: FeSpace) -> sp.csr_matrix:
    """Divergence pairing B[i, j] = (div v_j, q_i); exact for affine cells.

    On affine triangles (div v, q) pulls back to a geometry-free reference
    integral, so a single reference block is scattered with the orientation
    factors.
    """
    if V.value_shape != "vector" or Q.value_shape != "scalar":
        raise DegreeMismatch("assemble_div expects (vector, scalar) spaces")
    expected = max(V.degree - 1, 0)
    if Q.degree != expected:
        raise DegreeMismatch(f"pressure degree {Q.degree} does not match BDM degree {V.degree}")
    rule = triangle_rule(2 * V.degree + 2)
    divs = V.ref.div(rule.xy)  # (n_v, n_q), reference
    qv = Q.ref.eval(rule.xy)  # (n_q_loc, n_q)
    block = np.einsum("mq,lq,q->ml", qv, divs, rule.weights)
    local = np.broadcast_to(block, (V.mesh.n_triangles, *block.shape))
    return _scatter(local, Q.dof_map, Q.dof_signs, V.dof_map, V.dof_signs,
                    (Q.total_dofs, V.total_dofs))


def assemble_div_gram(V: FeSpace) -> sp.csr_matrix:
    """Gram matrix of divergences, (div v_j, div v_i); ||div u||^2 = u' D u."""
    rule = triangle_rule(2 * V.degree + 2)
    divs = V.ref.div(rule.xy)
    block = np.einsum("lq,mq,q->lm", divs, divs, rule.weights)
    local = block[None, :, :] / V.mesh.Jdet[:, None, None]
    A = _scatter(local, V.dof_map, V.dof_signs, V.dof_map, V.dof_signs,
                 (V.total_dofs, V.total_dofs))
    return (A + A.T) * 0.5


def assemble_moment(space: FeSpace) -> np.ndarray:
    """Vector of integrals (phi_i, 1); the zero-mean constraint row."""
    rule = volume_rule(space)
    if space.value_shape != "scalar":
        raise DegreeMismatch("moment vector requires a scalar space")
    vals, _ = tabulate_scalar(space, rule)
    block = vals @ rule.weights  # (n_loc,)
    local = block[None, :] * space.mesh.Jdet[:, None]
    return _scatter_vec(local, space.dof_map, space.dof_signs, space.total_dofs)


def assemble_load(V: FeSpace, f, time: float | None = None) -> np.ndarray:
    """Load vector (f, v_i) with f projected onto each tangent plane.

    f is a vectorized callable mapping positions (n, 3) -> (n, 3) (an
    optional time argument is passed through when given); any normal
    component is removed per triangle before integration.
    """
    rule = volume_rule(V, extra=2)
    mesh = V.mesh
    pts = physical_points(mesh, rule)
    flat = pts.reshape(-1, 3)
    fv = f(flat, time) if time is not None else f(flat)
    fv = np.asarray(fv, dtype=float).reshape(pts.shape)
    fv = fv - np.einsum("tqi,ti->tq", fv, mesh.tri_normals)[:, :, None] * mesh.tri_normals[:, None, :]
    vals, _, _ = tabulate_vector(V, rule)
    local = np.einsum("tlqi,tqi,q->tl", vals, fv, rule.weights) * mesh.Jdet[:, None]
    return _scatter_vec(local, V.dof_map, V.dof_signs, V.total_dofs)


def assemble_gradient_load(scalar_space: FeSpace, field: FeField) -> np.ndarray:
    """Load vector (field, grad phi_i) against broken gradients."""
    rule = triangle_rule(scalar_space.degree + field.space.degree + 3)
    mesh = scalar_space.mesh
    fv = tabulate_field(field, rule)  # (T, n_q, 3)
    _, grads = tabulate_scalar(scalar_space, rule)
    local = np.einsum("tlqi,tqi,q->tl", grads, fv, rule.weights) * mesh.Jdet[:, None]
    return _scatter_vec(local, scalar_space.dof_map, scalar_space.dof_signs,
                        scalar_space.total_dofs)


# -------------------------------------------------------------- embeddings
def assemble_rot_embedding(S: FeSpace, V: FeSpace) -> sp.csr_matrix:
    """Matrix whose column j holds the BDM coefficients of rot(phi_j).

    rot of a mapped scalar polynomial transforms with the same Piola map as
    the vector space, so the interpolation is exact: each column represents
    the pointwise-divergence-free, normal-continuous field rot(phi_j).
    Computed from a single reference block (interpolation, not integration:
    shared edge dofs are written once, by the edge-owning triangle).
    """
    if S.value_shape != "scalar" or V.value_shape != "vector":
        raise DegreeMismatch("rot embedding expects (scalar, vector) spaces")
    if S.degree != V.degree + 1:
        raise DegreeMismatch(
            f"rot embedding needs Lagrange degree {V.degree + 1}, got {S.degree}")
    if S.mesh is not V.mesh:
        raise DegreeMismatch("rot embedding requires a common mesh")
    mesh = V.mesh

    # rot-hat of the Lagrange reference basis as vector polynomials of
    # degree k: rot = (d/dy, -d/dx).
    exps_S = S.ref.exps
    exps_k = scalar_monomials(V.degree) if V.degree >= 1 else scalar_monomials(1)
    idx = {e: i for i, e in enumerate(exps_k)}
    n_lag = S.ref.n_local
    rot_coeffs = np.zeros((n_lag, len(exps_k), 2))
    for j in range(n_lag):
        for m, (a, b) in enumerate(exps_S):
            c = S.ref.coeffs[m, j]
            if b > 0:  # d/dy x^a y^b -> b x^a y^(b-1), first component
                rot_coeffs[j, idx[(a, b - 1)], 0] += c * b
            if a > 0:  # -d/dx -> -a x^(a-1) y^b, second component
                rot_coeffs[j, idx[(a - 1, b)], 1] -= c * a
    block = V.ref.apply_dofs(rot_coeffs, exps_k)  # (n_bdm_loc, n_lag)

    rows, cols, vals = [], [], []
    n_edge_dofs = V.ref.n_edge_dofs
    for t in range(mesh.n_triangles):
        own = np.ones(V.ref.n_local, dtype=bool)
        for i, (le, m) in enumerate(V.ref.edge_dofs):
            e = mesh.tri_edges[t, le]
            own[i] = mesh.edge_tris[e, 0] == t
        for i in range(V.ref.n_local):
            if not own[i]:
                continue
            g = V.dof_map[t, i]
            if g < 0:
                continue
            s = V.dof_signs[t, i]
            for j in range(n_lag):
                gj = S.dof_map[t, j]
                if gj < 0:
                    continue
                rows.append(g)
                cols.append(gj)
                vals.append(block[i, j] / s)
    return sp.csr_matrix((vals, (rows, cols)), shape=(V.total_dofs, S.total_dofs))


# ---------------------------------------------------------------- SIP form
_EDGE_TAB_CACHE: dict = {}


def _edge_ref_tab(ref, le: int, flip: bool, tq: np.ndarray, need_grads: bool):
    key = (id(ref), le, flip, len(tq), need_grads)
    hit = _EDGE_TAB_CACHE.get(key)
    if hit is None:
        xy = edge_ref_points(le, tq, flip)
        vals = ref.eval(xy)
        grads = ref.grad(xy) if need_grads else None
        hit = (vals, grads)
        _EDGE_TAB_CACHE[key] = hit
    return hit


def _edge_side(space: FeSpace, t: int, le: int, tq, need_grads: bool):
    """Physical tabulation of one element side of an edge, ordered along the
    global edge tangent."""
    mesh = space.mesh
    flip = not mesh.tri_edge_along[t, le]
    ref_vals, ref_grads = _edge_ref_tab(space.ref, le, flip, tq, need_grads)
    piola = mesh.F[t] / mesh.Jdet[t]
    vals = np.einsum("ic,lqc->lqi", piola, ref_vals)
    grads = None
    if need_grads:
        grads = np.einsum("ia,lqab,jb->lqij", piola, ref_grads, mesh.G[t])
    return vals, grads


def assemble_sip(V: FeSpace, mu: float, alpha: float | None = None,
                 dirichlet: bool = True) -> sp.csr_matrix:
    """Symmetric interior penalty form for the surface viscous operator.

    Element term mu eps(u):eps(v), consistency terms pairing the average
    co-normal traction with tangential jumps, and the penalty
    (alpha mu / h_E) <[u]_tau, [v]_tau>.  With dirichlet=True the same terms
    are added on boundary edges (Nitsche enforcement of homogeneous
    tangential Dirichlet data); dirichlet=False leaves boundary edges
    untouched (free slip).

    alpha defaults to 4 (k+1)^2.
    """
    if mu <= 0:
        raise NonpositiveParameter("viscosity mu must be positive")
    if alpha is None:
        alpha = 4.0 * (V.degree + 1) ** 2
    if alpha <= 0:
        raise NonpositiveParameter("penalty alpha must be positive")
    mesh = V.mesh
    k = V.degree

    rule = volume_rule(V)
    _, _, grads = tabulate_vector(V, rule, grads=True)
    eps = 0.5 * (grads + np.swapaxes(grads, 3, 4))
    local = mu * np.einsum("tlqij,tmqij,q->tlm", eps, eps, rule.weights) * mesh.Jdet[:, None, None]
    A = _scatter(local, V.dof_map, V.dof_signs, V.dof_map, V.dof_signs,
                 (V.total_dofs, V.total_dofs))

    tq, tw = edge_rule(2 * k + 2)
    n_loc = V.ref.n_local
    rows_all, cols_all, vals_all = [], [], []
    for e in range(mesh.n_edges):
        boundary = mesh.boundary_edge_mask[e]
        if boundary and not dirichlet:
            continue
        tau = mesh.edge_tangents[e]
        h_e = mesh.edge_lengths[e]
        w = tw * h_e
        sides = [int(mesh.edge_tris[e, 0])]
        if not boundary:
            sides.append(int(mesh.edge_tris[e, 1]))
        jump_rows, flux_rows, gdofs, gsigns = [], [], [], []
        for s_idx, t in enumerate(sides):
            le = mesh.local_edge_of(t, e)
            nu_out = mesh.conormals[t, le]
            vals, grads_s = _edge_side(V, t, le, tq, need_grads=True)
            eps_s = 0.5 * (grads_s + np.swapaxes(grads_s, 2, 3))
            trac = mu * np.einsum("lqij,j,i->lq", eps_s, nu_out, tau)
            vt = vals @ tau  # (n_loc, n_q)
            s_jump = 1.0 if s_idx == 0 else -1.0
            # average of co-normal tractions: (sig1 nu1 - sig2 nu2)/2
            s_flux = (1.0 if s_idx == 0 else -1.0) * (0.5 if not boundary else 1.0)
            jump_rows.append(s_jump * vt)
            flux_rows.append(s_flux * trac)
            gdofs.append(V.dof_map[t])
            gsigns.append(V.dof_signs[t])
        J = np.concatenate(jump_rows, axis=0)  # (n_side*n_loc, n_q)
        G = np.concatenate(flux_rows, axis=0)
        Jw = J * w
        block = -(G @ Jw.T) - (Jw @ G.T) + (alpha * mu / h_e) * (J @ Jw.T)
        gd = np.concatenate(gdofs)
        gs = np.concatenate(gsigns)
        block = block * gs[:, None] * gs[None, :]
        nn = len(gd)
        rows_all.append(np.broadcast_to(gd[:, None], (nn, nn)).ravel())
        cols_all.append(np.broadcast_to(gd[None, :], (nn, nn)).ravel())
        vals_all.append(block.ravel())
    if rows_all:
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        data = np.concatenate(vals_all)
        keep = (rows >= 0) & (cols >= 0)
        A = A + sp.coo_matrix((data[keep], (rows[keep], cols[keep])),
                              shape=(V.total_dofs, V.total_dofs)).tocsr()
    return (A + A.T) * 0.5


# -------------------------------------------------------------- convection
def divergence_norm(V: FeSpace, coefficients: np.ndarray) -> float:
    """||div u||_{L2}, evaluated pointwise before squaring.

    Summing the pointwise divergences first keeps the cancellation error at
    eps * scale instead of the sqrt(eps) floor of the Gram quadratic form,
    so machine-zero divergences measure as ~1e-15 relative.
    """
    rule = triangle_rule(2 * V.degree + 2)
    mesh = V.mesh
    loc = V.local_coefficients(np.asarray(coefficients, dtype=float))
    div_vals = np.einsum("tl,lq->tq", loc, V.ref.div(rule.xy)) / mesh.Jdet[:, None]
    sq = np.einsum("tq,q,t->", div_vals**2, rule.weights, mesh.Jdet)
    return float(np.sqrt(max(sq, 0.0)))


def _convection_cache(V: FeSpace) -> dict:
    """State-independent tabulations for the convection form.

    Cached by the Navier-Stokes stepper so each time step only recomputes
    the w-dependent parts: volume basis values/gradients, per-interior-edge
    basis traces decomposed into conormal/tangent components, and the
    scatter index arrays.
    """
    mesh = V.mesh
    k = V.degree
    cache: dict = {"space": V}
    rule = triangle_rule(max(2 * k + 3, 3 * k))
    vals, _, grads = tabulate_vector(V, rule, grads=True)
    cache["vol"] = (rule, vals, grads)

    tq, tw = edge_rule(max(2 * k + 2, 3 * k))
    interior = np.flatnonzero(~mesh.boundary_edge_mask)
    n_loc = V.ref.n_local
    n_e, n_q = len(interior), len(tq)
    bn = np.zeros((n_e, 2, n_loc, n_q))
    bt = np.zeros((n_e, 2, n_loc, n_q))
    gd = np.zeros((n_e, 2 * n_loc), dtype=np.int64)
    gs = np.zeros((n_e, 2 * n_loc))
    t_sides = np.zeros((n_e, 2), dtype=np.int64)
    for i, e in enumerate(interior):
        tau = mesh.edge_tangents[e]
        for side in range(2):
            t = int(mesh.edge_tris[e, side])
            le = mesh.local_edge_of(t, e)
            svals, _ = _edge_side(V, t, le, tq, need_grads=False)
            bn[i, side] = svals @ mesh.conormals[t, le]
            bt[i, side] = svals @ tau
            gd[i, side * n_loc : (side + 1) * n_loc] = V.dof_map[t]
            gs[i, side * n_loc : (side + 1) * n_loc] = V.dof_signs[t]
            t_sides[i, side] = t
    cache["edge"] = (interior, tq, tw, bn, bt, gd, gs, t_sides)
    nn = 2 * n_loc
    rows = np.broadcast_to(gd[:, :, None], (n_e, nn, nn)).ravel()
    cols = np.broadcast_to(gd[:, None, :], (n_e, nn, nn)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    cache["scatter"] = (rows[keep], cols[keep], keep)
    cache["gs_outer"] = gs[:, :, None] * gs[:, None, :]
    return cache


def assemble_convection(V: FeSpace, w: FeField, check_divfree: bool = True,
                        div_tol: float = 1e-8, cache: dict | None = None) -> sp.csr_matrix:
    """Upwind DG convection form c_h(w; u, v).

    Element term -(u, grad(v) w) plus facet upwind terms (w . nu)(u_up . v)
    over element boundaries, with the tangential trace of u taken from the
    upwind element and the (single-valued) normal trace from the element
    itself.  Boundary edges carry no flux for fields with zero normal trace
    and are skipped.  The quadrature is exact for the trilinear form, which
    makes c_h(w; u, u) >= 0 hold to rounding error for divergence-free w.

    A cache dict (reused across calls with the same space) avoids
    re-tabulating the state-independent basis data.
    """
    if w.space is not V and w.space.total_dofs != V.total_dofs:
        raise DegreeMismatch("convecting field must live in the velocity space")
    mesh = V.mesh
    if check_divfree:
        wm = float(np.linalg.norm(w.coefficients))
        if wm > 0 and divergence_norm(V, w.coefficients) > div_tol * wm:
            raise NotDivergenceFree("convecting field is not discretely divergence-free")
    if cache is None or cache.get("space") is not V:
        fresh = _convection_cache(V)
        if cache is not None:
            cache.clear()
            cache.update(fresh)
        else:
            cache = fresh

    rule, vals, grads = cache["vol"]
    w_loc = V.local_coefficients(w.coefficients)
    wv = np.einsum("tl,tlqi->tqi", w_loc, vals)
    local = -np.einsum("tbqi,taqij,tqj,q->tab", vals, grads, wv,
                       rule.weights) * mesh.Jdet[:, None, None]
    A = _scatter(local, V.dof_map, V.dof_signs, V.dof_map, V.dof_signs,
                 (V.total_dofs, V.total_dofs))

    interior, tq, tw, bn, bt, gd, gs, t_sides = cache["edge"]
    if len(interior) == 0:
        return A
    n_loc = V.ref.n_local
    nn = 2 * n_loc
    wq = tw[None, :] * mesh.edge_lengths[interior][:, None]  # (E, n_q)
    # single-valued normal flux of w seen from side 1; upwind element has
    # w . nu_out > 0 there
    wn1 = np.einsum("el,elq->eq", w_loc[t_sides[:, 0]], bn[:, 0])
    cn = wn1 * wq
    up1 = wn1 > 0
    blocks = np.zeros((len(interior), nn, nn))
    for s_idx in range(2):
        sgn = 1.0 if s_idx == 0 else -1.0
        rows_sl = slice(s_idx * n_loc, (s_idx + 1) * n_loc)
        blocks[:, rows_sl, rows_sl] += np.einsum(
            "eaq,ebq,eq->eab", bn[:, s_idx], bn[:, s_idx], sgn * cn)
        blocks[:, rows_sl, 0:n_loc] += np.einsum(
            "eaq,ebq,eq->eab", bt[:, s_idx], bt[:, 0], np.where(up1, sgn * cn, 0.0))
        blocks[:, rows_sl, n_loc:nn] += np.einsum(
            "eaq,ebq,eq->eab", bt[:, s_idx], bt[:, 1], np.where(up1, 0.0, sgn * cn))
    blocks *= cache["gs_outer"]
    rows, cols, keep = cache["scatter"]
    data = blocks.ravel()[keep]
    A = A + sp.coo_matrix((data, (rows, cols)),
                          shape=(V.total_dofs, V.total_dofs)).tocsr()
    return A


# -------------------------------------------------------------------- misc
def l2_norm(field: FeField, mass: sp.csr_matrix | None = None) -> float:
    M = assemble_mass(field.space) if mass is None else mass
    return float(np.sqrt(max(field.coefficients @ (M @ field.coefficients), 0.0)))


def dump_matrix_market(A, path) -> None:
    """Debug dump in MatrixMarket coordinate format."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(A))
