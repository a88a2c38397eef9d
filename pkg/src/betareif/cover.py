"""Good/bad-ball classification, sigma-maps, the multiscale covering engine,
the packing driver, and the Reifenberg-flat parametrization.

Scale ladder: r_i = chi^i.  Stage i+1 refines only inside the stage-i good
balls; original and bad balls are retired where they are created.  All
randomness is seeded per (stage, ball index); runs are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from .geometry import (AffinePlane, AlmostProjection, affine_plane,
                       _euclid_orthonormal, distances_to_affine,
                       grassmann_distance, graph_check, make_projection)
from .measures import PointMeasure, best_plane, beta, beta_inf, dini_profile
from .spaces import NormedSpace

__all__ = [
    "PartitionOfUnity", "BallLabel", "SigmaMap", "CoverConfig", "CoverResult",
    "PackingResult", "partition_of_unity", "classify_ball", "tilting_report",
    "sigma_apply", "squash_report", "covering_lemma", "main_packing",
    "reifenberg_flat_map", "default_theta", "projection_kind",
]


# ---------------------------------------------------------------------------
# partition of unity
# ---------------------------------------------------------------------------

@dataclass
class PartitionOfUnity:
    """The truncated partition of unity subordinate to {B_3r(x_i)}:
    b(t) = (3-t)_+, psi_i = b(||x-x_i||/r), s = sum psi_i, h piecewise
    linear (0 below 1/4, 1 above 1/2), phi_i = h(s) psi_i / s."""

    centers: np.ndarray
    r: float
    space: NormedSpace

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        D = self.space.norms(X[:, None, :] - self.centers[None, :, :]) / self.r
        psi = np.clip(3.0 - D, 0.0, None)
        s = psi.sum(axis=1)
        h = np.clip(4.0 * s - 1.0, 0.0, 1.0)
        out = np.zeros_like(psi)
        pos = s > 0
        out[pos] = h[pos, None] * psi[pos] / s[pos, None]
        return out

    def sum_values(self, X) -> np.ndarray:
        return self.values(X).sum(axis=1)

    def overlap_count(self, X) -> int:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        D = self.space.norms(X[:, None, :] - self.centers[None, :, :])
        return int((D < 3.0 * self.r).sum(axis=1).max())


def partition_of_unity(centers, r: float, space: NormedSpace) -> PartitionOfUnity:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    return PartitionOfUnity(centers, float(r), space)


# ---------------------------------------------------------------------------
# good/bad balls
# ---------------------------------------------------------------------------

def default_theta(k: int) -> float:
    """Good-ball mass threshold; desk stand-in for c_2(k)^-1/10."""
    return 0.1 * 5.0 ** (-k)


@dataclass
class BallLabel:
    center: np.ndarray
    radius: float
    kind: str                       # "good" | "bad" | "original"
    witnesses: np.ndarray | None = None       # (k+1, n) for good balls
    witness_plane: AffinePlane | None = None  # (k-1)-plane for bad balls

    def to_dict(self) -> dict:
        d = {"center": self.center.tolist(), "radius": self.radius, "kind": self.kind}
        if self.witnesses is not None:
            d["witnesses"] = self.witnesses.tolist()
        if self.witness_plane is not None:
            d["witness_plane"] = self.witness_plane.to_fragment()
        return d


def _pad_to_dim(space, base, rows, target_dim):
    """Extend rows to target_dim directions, appending standard basis
    vectors (Euclid-orthogonalized) deterministically."""
    rows = list(np.asarray(rows, dtype=float).reshape(-1, space.dim))
    for e in np.eye(space.dim):
        if len(rows) >= target_dim:
            break
        cand = e.copy()
        if rows:
            Q = _euclid_orthonormal(np.asarray(rows))
            cand = cand - (Q.T @ (Q @ cand))
        if np.linalg.norm(cand) > 1e-9:
            rows.append(cand / np.linalg.norm(cand))
    return np.asarray(rows[:target_dim]).reshape(target_dim, space.dim)


def classify_ball(space: NormedSpace, mu: PointMeasure, x, r: float, k: int,
                  chi: float, theta: float | None = None) -> BallLabel:
    """Greedy witness search for the good-ball conditions.

    Scans atoms z in B_r(x) with mu(B_chi_r(z) cap B_r(x)) >= theta (chi r)^k,
    picking at each step the candidate farthest from the affine hull of the
    previous witnesses.  Success through k+1 witnesses => good; a step with
    no candidate escaping the 7 chi r neighborhood => bad, with the hull
    (padded to dimension k-1) as the witness plane."""
    if not (0 < chi <= 0.1):
        raise ValueError("need 0 < chi <= 1/10")
    if theta is None:
        theta = default_theta(k)
    x = np.asarray(x, dtype=float)
    d_atoms = space.norms(mu.points - x[None, :])
    in_ball = d_atoms <= r
    pts = mu.points[in_ball]
    if len(pts) == 0:
        return BallLabel(x, r, "bad",
                         witness_plane=_witness_plane(space, x, [], k))
    # local mass of every candidate: mu(B_chi_r(z) cap B_r(x))
    D = space.norms(pts[:, None, :] - mu.points[None, :, :])
    local = ((D <= chi * r) & in_ball[None, :]) @ mu.weights
    passing = local >= theta * (chi * r) ** k
    cand = pts[passing]
    if len(cand) == 0:
        return BallLabel(x, r, "bad",
                         witness_plane=_witness_plane(space, x, [], k))
    if k == 0:
        return BallLabel(x, r, "good", witnesses=cand[:1])
    # start from the candidate with most local mass, ties by index
    witnesses = [cand[int(np.argmax(local[passing]))]]
    for _j in range(1, k + 1):
        hull_base = witnesses[0]
        hull_dirs = np.asarray(witnesses[1:]) - hull_base[None, :] if len(witnesses) > 1 else np.zeros((0, space.dim))
        dists = _dists_to_affine_hull(space, hull_base, hull_dirs, cand)
        i = int(np.argmax(dists))
        if dists[i] < 7.0 * chi * r:
            return BallLabel(x, r, "bad",
                             witness_plane=_witness_plane(space, hull_base, hull_dirs, k))
        witnesses.append(cand[i])
    return BallLabel(x, r, "good", witnesses=np.asarray(witnesses))


def _dists_to_affine_hull(space, base, dirs, pts):
    if len(dirs) == 0:
        return space.norms(pts - base[None, :])
    return distances_to_affine(space, AffinePlane(base, np.asarray(dirs), 1.0), pts)


def _witness_plane(space, base, dirs, k):
    """Bad-ball certificate padded to a (k-1)-plane; a plane containing the
    hull certifies badness as well (its neighborhood is larger)."""
    dirs = np.asarray(dirs, dtype=float).reshape(-1, space.dim)
    kk = max(k - 1, 0)
    if kk == 0:
        return AffinePlane(np.asarray(base, dtype=float), np.zeros((0, space.dim)), 1.0)
    rows = _pad_to_dim(space, base, dirs, kk)
    return affine_plane(space, base, rows)


# ---------------------------------------------------------------------------
# tilting report
# ---------------------------------------------------------------------------

@dataclass
class TiltingReport:
    pairs: list
    max_ratio: float

    def to_dict(self):
        return {"pairs": self.pairs, "max_ratio": self.max_ratio}


def tilting_report(space: NormedSpace, mu: PointMeasure, ball_pairs, k: int,
                   chi: float, theta: float | None = None,
                   seed: int = 0) -> TiltingReport:
    """For each pair of good balls, d_G between their best planes against
    beta of the enclosing ball; reports the per-pair values and the max
    ratio (the empirical tilting constant)."""
    rows = []
    max_ratio = 0.0
    for (x, r), (x2, r2) in ball_pairs:
        x, x2 = np.asarray(x, dtype=float), np.asarray(x2, dtype=float)
        for c, rr in ((x, r), (x2, r2)):
            lab = classify_ball(space, mu, c, rr, k, chi, theta)
            if lab.kind != "good":
                raise ValueError(f"ball at {c.tolist()} radius {rr} is not good")
        y = (x + x2) / 2.0
        R = space.norm(x - x2) + 2.0 * max(r, r2)
        b1 = best_plane(space, mu, x, r, k, seed=seed)
        b2 = best_plane(space, mu, x2, r2, k, seed=seed)
        dg = grassmann_distance(space, b1.plane, b2.plane)
        by = beta(space, mu, y, R, k, seed=seed)
        ratio = dg / by if by > 1e-15 else (0.0 if dg <= 1e-12 else math.inf)
        rows.append({"d_G": dg, "beta_enclosing": by, "ratio": ratio,
                     "R": R, "y": y.tolist()})
        max_ratio = max(max_ratio, ratio)
    return TiltingReport(rows, max_ratio)


# ---------------------------------------------------------------------------
# sigma maps
# ---------------------------------------------------------------------------

@dataclass
class SigmaMap:
    """One interpolation stage sigma(x) = x - sum_i phi_i(x) perp_i(x - p_i)."""

    r: float
    centers: np.ndarray
    planes: list                   # AffinePlane per center
    projections: list              # AlmostProjection per center
    pou: PartitionOfUnity

    def apply_many(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        phi = self.pou.values(X)
        out = X.copy()
        for i, (pl, pj) in enumerate(zip(self.planes, self.projections)):
            col = phi[:, i]
            if not (col > 0).any():
                continue
            rel = X - pl.base[None, :]
            perp = rel - pj.apply(rel)
            out -= col[:, None] * perp
        return out

    def apply(self, x) -> np.ndarray:
        return self.apply_many(np.asarray(x, dtype=float)[None, :])[0]

    def to_dict(self) -> dict:
        return {"r": self.r,
                "centers": self.centers.tolist(),
                "planes": [pl.to_fragment() for pl in self.planes],
                "projections": [pj.report() for pj in self.projections]}


def sigma_apply(sigma: SigmaMap, x):
    return sigma.apply(x)


def projection_kind(space: NormedSpace, k: int) -> str:
    if space.is_hilbert:
        return "orthogonal"
    if k == 1 and 1.0 < space.p < math.inf:
        return "j_projection"
    return "hahn_banach"


def build_sigma(space: NormedSpace, centers, r: float, planes, k: int) -> SigmaMap:
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    kind = projection_kind(space, k)
    projections = [make_projection(space, pl, kind) for pl in planes]
    return SigmaMap(float(r), centers, list(planes), projections,
                    partition_of_unity(centers, r, space))


# ---------------------------------------------------------------------------
# squash report
# ---------------------------------------------------------------------------

@dataclass
class SquashReport:
    hypothesis_ok: bool
    hypothesis_notes: list
    sup_displacement: float        # sup ||sigma(x) - x|| / r
    lip_deviation: float           # sup ||(sigma x - x) - (sigma y - y)|| / ||x - y||
    new_height: float              # re-graphed sup height / r
    new_lipschitz: float
    interior_height: float         # same, restricted to the sum phi = 1 region
    interior_lipschitz: float
    tangential_sup: float | None   # part D, orthogonal/J kinds only
    sq_distortion: float | None    # max relative squared-distance distortion
    delta: float
    eps: float

    def to_dict(self):
        return dict(self.__dict__, hypothesis_notes=list(self.hypothesis_notes))


def squash_report(sigma: SigmaMap, graph_sample, plane: AffinePlane,
                  proj: AlmostProjection, delta: float, eps: float) -> SquashReport:
    """Measure how one interpolation stage squashes a graph sample over
    (plane, proj): displacement and Lipschitz deviation (A), re-graphed
    height/Lipschitz bounds (B), the same over the interior region where
    the partition sums to 1 (C), and for orthogonal/J projections the
    tangential movement and squared-distance distortion (D)."""
    space = sigma.pou.space
    X = np.atleast_2d(np.asarray(graph_sample, dtype=float))
    r = sigma.r
    notes = []
    ok, h0, lip0 = graph_check(space, X, plane, proj)
    if not ok:
        notes.append("sample is not a graph over the plane")
    if lip0 > eps * (1 + 1e-9) + 1e-12:
        notes.append(f"sample Lipschitz {lip0:.3g} exceeds eps {eps:.3g}")
    for i, pl in enumerate(sigma.planes):
        dist_p = distances_to_affine(space, plane, pl.base[None, :])[0]
        dg = grassmann_distance(space, pl, plane)
        if dist_p > delta * r * (1 + 1e-9) + 1e-12:
            notes.append(f"plane {i}: base {dist_p / r:.3g} r from reference (> delta)")
        if dg > delta * (1 + 1e-9) + 1e-12:
            notes.append(f"plane {i}: d_G {dg:.3g} > delta")
    Y = sigma.apply_many(X)
    disp = space.norms(Y - X)
    sup_disp = float(disp.max() / r) if len(X) else 0.0
    m = len(X)
    lipdev = 0.0
    sqdist = 0.0
    if m > 1:
        iu = np.triu_indices(m, k=1)
        dX = space.norms(X[:, None, :] - X[None, :, :])[iu]
        dY = space.norms(Y[:, None, :] - Y[None, :, :])[iu]
        dd = space.norms((Y - X)[:, None, :] - (Y - X)[None, :, :])[iu]
        sep = dX > 1e-12 * (1 + space.norms(X).max())
        if sep.any():
            lipdev = float((dd[sep] / dX[sep]).max())
            sqdist = float((np.abs(dY[sep] ** 2 - dX[sep] ** 2) / dX[sep] ** 2).max())
    _, h1, lip1 = graph_check(space, Y, plane, proj)
    inside = sigma.pou.sum_values(X) >= 1.0 - 1e-9
    if inside.any():
        _, h2, lip2 = graph_check(space, Y[inside], plane, proj)
    else:
        h2, lip2 = 0.0, 0.0
    if proj.kind in ("orthogonal", "j_projection"):
        tang = float(space.norms(proj.apply(Y - X)).max() / r) if len(X) else 0.0
        sq = sqdist
    else:
        tang, sq = None, None
    return SquashReport(len(notes) == 0, notes, sup_disp, lipdev,
                        float(h1 / r), lip1, float(h2 / r), lip2, tang, sq,
                        delta, eps)


# ---------------------------------------------------------------------------
# covering engine
# ---------------------------------------------------------------------------

@dataclass
class CoverConfig:
    chi: float = 0.1
    delta: float | None = None      # None: use the measured Dini delta
    alpha: float | str = "auto"
    theta: float | None = None
    max_depth: int = 6
    seed: int = 0
    distortion_pairs: int = 1000
    c4: float = 100.0               # squash constant for estimate checks
    leftover_c: float | None = None # item-7 constant; None: proof chain value

    def resolve_alpha(self, space: NormedSpace) -> float:
        if self.alpha == "auto":
            return space.smoothness_power()
        return float(self.alpha)

    def ledger(self, space: NormedSpace, k: int) -> dict:
        return {
            "chi": self.chi, "theta": self.theta if self.theta is not None else default_theta(k),
            "alpha": self.resolve_alpha(space), "max_depth": self.max_depth,
            "seed": self.seed, "c1": C.c1(k), "c2": C.c2(k), "c3": C.c3(k),
            "c5": C.c5(k), "c_B": C.c_packing_count(k),
            "Gamma": C.overlap_bound(k), "c4": self.c4,
            "leftover_c": self.leftover_c if self.leftover_c is not None else C.c2(k),
        }


@dataclass
class StageReport:
    index: int
    scale: float
    n_good: int
    n_bad: int
    n_original: int
    beta_max: float                 # max beta over the stage's good balls
    graph_height: float             # measured graphicality constants on the
    graph_lip: float                # pushed sample near good balls
    pou_overlap: int
    disjoint_ok: bool
    radius_ok: bool
    packing_sum: float
    beta_shift_ok: bool
    new_balls: list = field(default_factory=list)   # labelled per-stage balls

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class CoverResult:
    kept_originals: list            # (center, radius) pairs
    bad_balls: list                 # BallLabel
    tau_stages: list                # SigmaMap
    leftover_mass: float
    packing_sum: float
    distortion: float
    excess_mass: float
    stages: list
    ledger: dict
    item_checks: dict
    valid: bool
    estimate_violated: bool
    flags: list
    measured_delta: float
    base_plane: AffinePlane | None = None
    frame: tuple | None = None      # (center, radius) when run off the unit ball

    def tau_apply(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.frame is not None:
            c, r = self.frame
            X = (X - np.asarray(c)[None, :]) / r
        for s in self.tau_stages:
            X = s.apply_many(X)
        if self.frame is not None:
            c, r = self.frame
            X = X * r + np.asarray(c)[None, :]
        return X

    def to_dict(self) -> dict:
        out = {
            "kept_originals": [[list(map(float, c)), float(r)] for c, r in self.kept_originals],
            "bad_balls": [b.to_dict() for b in self.bad_balls],
            "tau_stages": [s.to_dict() for s in self.tau_stages],
            "leftover_mass": self.leftover_mass,
            "packing_sum": self.packing_sum,
            "distortion": self.distortion,
            "excess_mass": self.excess_mass,
            "stages": [s.to_dict() for s in self.stages],
            "ledger": self.ledger,
            "item_checks": self.item_checks,
            "valid": self.valid,
            "estimate_violated": self.estimate_violated,
            "flags": self.flags,
            "measured_delta": self.measured_delta,
        }
        if self.frame is not None:
            out["frame"] = {"center": list(map(float, self.frame[0])),
                            "radius": float(self.frame[1])}
        return out


def _vitali_keep(space, centers, radii, order=None):
    """Greedy Vitali: keep balls by descending radius (ties by index) whose
    1/5-balls stay disjoint from all kept 1/5-balls."""
    m = len(radii)
    if m == 0:
        return []
    idx = sorted(range(m), key=lambda i: (-radii[i], i)) if order is None else order
    kept = []
    for i in idx:
        ok = True
        for j in kept:
            if space.norm(centers[i] - centers[j]) < (radii[i] + radii[j]) / 5.0 - 1e-12:
                ok = False
                break
        if ok:
            kept.append(i)
    return kept


def _farthest_net(space, pts, sep, order_idx=None):
    """Maximal sep-separated subset by greedy farthest-point insertion with
    lexicographic (index) tie-break; returns indices into pts."""
    m = len(pts)
    if m == 0:
        return []
    chosen = [0]
    dmin = space.norms(pts - pts[0][None, :])
    while True:
        i = int(np.argmax(dmin))
        if dmin[i] < sep:
            break
        chosen.append(i)
        dmin = np.minimum(dmin, space.norms(pts - pts[i][None, :]))
    return chosen


def _in_any_ball(space, pts, balls):
    """Membership of each point in the union of closed balls (center, r)."""
    out = np.zeros(len(pts), dtype=bool)
    for c, r in balls:
        out |= space.norms(pts - np.asarray(c)[None, :]) < r * (1 + 1e-12)
        # open-vs-closed is immaterial for retired regions; tolerance keeps
        # boundary atoms from resurfacing through float noise
    return out


def _plane_grid(plane: AffinePlane, radius: float, per_side: int = 9):
    k = plane.k
    if k == 0:
        return plane.base[None, :]
    ticks = np.linspace(-radius, radius, per_side)
    mesh = np.meshgrid(*([ticks] * k), indexing="ij")
    coeffs = np.stack([m.ravel() for m in mesh], axis=1)
    return plane.points(coeffs)


def covering_lemma(space: NormedSpace, mu: PointMeasure, S, r_s, k: int,
                   cfg: CoverConfig | None = None, center=None,
                   radius: float = 1.0) -> CoverResult:
    """Run the multiscale covering construction on B_radius(center).

    S holds atom indices forming the generalized covering; r_s their radii
    (0 for the zero part).  Executes, per stage: excess-set removal, the
    Vitali selection of surviving original balls, the maximal 2r/5 net,
    good/bad classification, and the sigma-map assembly from the good
    balls' best planes; composes tau and evaluates the seven item checks.
    """
    cfg = cfg or CoverConfig()
    if center is None:
        center = np.zeros(space.dim)
    center = np.asarray(center, dtype=float)
    S = np.asarray(S, dtype=int)
    r_s_arr = np.asarray(r_s, dtype=float).reshape(-1)
    if len(r_s_arr) != len(S):
        raise ValueError("r_s must align with S")
    if (r_s_arr >= radius).any():
        raise ValueError("r_s < ball radius required")
    # normalize to the unit ball at the origin
    pts = (mu.points[S] - center[None, :]) / radius
    w = mu.weights[S] / radius**k
    mu_n = PointMeasure(pts.reshape(-1, space.dim), w) if len(S) else \
        PointMeasure(np.zeros((0, space.dim)), np.zeros(0))
    rs = r_s_arr / radius
    res = _covering_normalized(space, mu_n, rs, k, cfg)
    if radius != 1.0 or center.any():
        _denormalize(space, res, center, radius, k)
    return res


def _denormalize(space, res: "CoverResult", center, radius, k):
    """Map a normalized CoverResult back to the original frame (masses and
    packing sums carry the r^k scaling; sigma stages keep their own frame)."""
    res.kept_originals = [(np.asarray(c) * radius + center, r * radius)
                          for c, r in res.kept_originals]
    for b in res.bad_balls:
        b.center = np.asarray(b.center) * radius + center
        b.radius = b.radius * radius
        if b.witness_plane is not None:
            b.witness_plane = AffinePlane(b.witness_plane.base * radius + center,
                                          b.witness_plane.basis,
                                          b.witness_plane.tau_margin)
    res.leftover_mass *= radius**k
    res.excess_mass *= radius**k
    res.packing_sum *= radius**k
    res.frame = (center, radius)


def _covering_normalized(space, mu, rs, k, cfg):
    chi = cfg.chi
    alpha = cfg.resolve_alpha(space)
    theta = cfg.theta if cfg.theta is not None else default_theta(k)
    ledger = cfg.ledger(space, k)
    flags = []
    origin = np.zeros(space.dim)

    # Dini precheck per atom: int_{r_s}^{2} beta^alpha dr/r at grid chi
    measured = 0.0
    for idx in range(len(mu)):
        lo = max(rs[idx], chi**cfg.max_depth)
        prof = dini_profile(space, mu, mu.points[idx], lo, 2.0, k, alpha, chi,
                            seed=cfg.seed + idx)
        measured = max(measured, prof.dini_sum)
    measured_delta = measured ** (1.0 / alpha) if measured > 0 else 0.0
    delta = cfg.delta if cfg.delta is not None else max(measured_delta, 1e-12)
    if measured_delta > delta * (1 + 1e-9):
        flags.append(f"dini precheck: measured delta {measured_delta:.3g} exceeds configured {delta:.3g}")

    top = classify_ball(space, mu, origin, 1.0, k, chi, theta)
    if top.kind == "bad":
        leftover = _leftover(space, mu, rs, [], [(origin, 1.0)], [], None, 0.0)
        item = {"early_exit": "top ball is bad"}
        return CoverResult([], [top], [], leftover, 1.0, 1.0,
                           0.0, [], ledger, item, True, False, flags,
                           measured_delta, None)

    top_fit = best_plane(space, mu, origin, 1.0, k, seed=cfg.seed)
    T0 = top_fit.plane
    goods = [(origin, 1.0, top_fit)]
    retired = []            # (center, radius) of original + bad balls
    kept_orig = []          # (center, radius)
    bad_out = []            # BallLabel
    excess = np.zeros(len(mu), dtype=bool)
    sigmas = []
    stages = []
    estimate_violated = False
    valid = True

    # tracked sample of T0 for graph diagnostics and distortion
    grid = _plane_grid(T0, 1.2, per_side=9 if k <= 2 else 5)
    grid = grid[space.norms(grid - origin[None, :]) <= 3.0]
    track = grid.copy()
    rng = np.random.default_rng(cfg.seed + 7)
    npairs = cfg.distortion_pairs
    coefs = rng.uniform(-1.0, 1.0, size=(2 * npairs, max(k, 1)))
    pair_pts = T0.points(coefs[:, :k]) if k > 0 else np.repeat(T0.base[None, :], 2 * npairs, axis=0)
    pair_track = pair_pts.copy()

    for i in range(cfg.max_depth):
        r_i = chi**i
        r_next = chi ** (i + 1)
        # excess set
        for (g, rg, fit) in goods:
            near = space.norms(mu.points - g[None, :]) <= rg
            if near.any():
                d = distances_to_affine(space, fit.plane, mu.points[near])
                sel = np.where(near)[0][d >= r_next / 30.0]
                excess[sel] = True
        # original-ball Vitali selection
        cand_mask = (rs >= r_next) & (rs < r_i) & ~_in_any_ball(space, mu.points, retired)
        near_good = np.zeros(len(mu), dtype=bool)
        for (g, rg, fit) in goods:
            m1 = space.norms(mu.points - g[None, :]) <= 1.5 * r_i
            if m1.any():
                d = distances_to_affine(space, fit.plane, mu.points[m1])
                ok = np.where(m1)[0][d < r_next / 30.0]
                near_good[ok] = True
        cand = np.where(cand_mask & near_good)[0]
        keep = _vitali_keep(space, mu.points[cand], rs[cand])
        new_orig = [(mu.points[cand[j]], rs[cand[j]]) for j in keep]
        kept_orig.extend(new_orig)
        retired_now = retired + new_orig
        # net for good/bad classification; prior-stage excess may re-enter
        # whenever it sits near a current plane, as in the construction
        net_mask = (space.norms(mu.points) <= 1.0) & ~_in_any_ball(space, mu.points, retired_now)
        near_good2 = np.zeros(len(mu), dtype=bool)
        for (g, rg, fit) in goods:
            m1 = space.norms(mu.points - g[None, :]) <= rg
            if m1.any():
                d = distances_to_affine(space, fit.plane, mu.points[m1])
                ok = np.where(m1)[0][d < r_next / 30.0]
                near_good2[ok] = True
        net_cand = np.where(net_mask & near_good2)[0]
        net_idx = _farthest_net(space, mu.points[net_cand], 2.0 * r_next / 5.0)
        new_goods, new_bads = [], []
        for j in net_idx:
            c = mu.points[net_cand[j]]
            lab = classify_ball(space, mu, c, r_next, k, chi, theta)
            if lab.kind == "good":
                fit = best_plane(space, mu, c, r_next, k, seed=cfg.seed + 10007 * (i + 1) + j)
                if not fit.valid:
                    flags.append(f"stage {i + 1}: uncertified best-plane fit at "
                                 f"{np.round(c, 4).tolist()} (factor {fit.certified_factor:.2f})")
                new_goods.append((c, r_next, fit))
            else:
                if mu.mass_in_ball(space, c, r_next) > 0:
                    new_bads.append(lab)
        bad_out.extend(new_bads)
        retired = retired_now + [(b.center, b.radius) for b in new_bads]

        # sigma stage from the new good balls
        if new_goods:
            planes = [fit.plane for (_, _, fit) in new_goods]
            centers = np.asarray([g for (g, _, _) in new_goods])
            sigma = build_sigma(space, centers, r_next, planes, k)
            sigmas.append(sigma)
            track = sigma.apply_many(track)
            pair_track = sigma.apply_many(pair_track)
        else:
            sigma = None

        stages.append(_stage_report(space, i + 1, r_next, new_goods, new_bads,
                                    new_orig, kept_orig, bad_out, goods, sigma,
                                    track, mu, rs, excess, retired, delta, k,
                                    cfg, flags))
        if not stages[-1].beta_shift_ok:
            estimate_violated = True
        goods = new_goods
        if not goods:
            break

    # final accounting
    leftover = _leftover(space, mu, rs, kept_orig, [(b.center, b.radius) for b in bad_out],
                         goods, None, chi ** len(stages))
    packing = sum(r**k for _, r in kept_orig) + sum(b.radius**k for b in bad_out)
    packing_all = packing + sum(rg**k for (_, rg, _) in goods)
    excess_mass = float(mu.weights[excess].sum())
    distortion = _distortion(space, pair_pts, pair_track, npairs)
    item_checks = {
        "item1_base_plane": T0.to_fragment(),
        "item2_graph_height": max((s.graph_height for s in stages), default=0.0),
        "item2_graph_lip": max((s.graph_lip for s in stages), default=0.0),
        "item3_distortion": distortion,
        "item4_disjoint": all(s.disjoint_ok for s in stages),
        "item5_radius": all(s.radius_ok for s in stages),
        "item6_packing_sum": packing_all,
        "item6_ok": packing_all <= C.c5(k),
        "item7_leftover": leftover,
        "item7_bound": float((cfg.leftover_c if cfg.leftover_c is not None else C.c2(k)) * delta**alpha),
        "excess_mass": excess_mass,
    }
    item_checks["item7_ok"] = item_checks["item7_leftover"] <= item_checks["item7_bound"] * (1 + 1e-9)
    if not item_checks["item7_ok"] or not item_checks["item6_ok"]:
        estimate_violated = True
    return CoverResult(kept_orig, bad_out, sigmas, leftover, packing,
                       distortion, excess_mass, stages, ledger, item_checks,
                       valid, estimate_violated, flags, measured_delta, T0)


def _stage_report(space, index, scale, new_goods, new_bads, new_orig,
                  kept_orig, bad_out, prev_goods, sigma, track, mu, rs,
                  excess, retired, delta, k, cfg, flags):
    balls = [(c, r) for c, r in kept_orig] + \
            [(b.center, b.radius) for b in bad_out] + \
            [(g, rg) for (g, rg, _) in new_goods]
    disjoint = True
    for a in range(len(balls)):
        for b in range(a + 1, len(balls)):
            ca, ra = balls[a]
            cb, rb = balls[b]
            if space.norm(np.asarray(ca) - np.asarray(cb)) < (ra + rb) / 5.0 - 1e-12:
                disjoint = False
    # radius control: inside each new bad/good ball, originals with larger
    # radius must already be retired or excess (the ball itself excluded)
    radius_ok = True
    checked = [(b.center, b.radius) for b in new_bads] + \
              [(g, rg) for (g, rg, _) in new_goods]
    for c, r in checked:
        others = [bl for bl in retired + new_orig
                  if not (np.array_equal(np.asarray(bl[0]), np.asarray(c)) and bl[1] == r)]
        inside = space.norms(mu.points - np.asarray(c)[None, :]) <= r
        offenders = inside & (rs >= r) & ~excess & ~_in_any_ball(space, mu.points, others)
        if offenders.any():
            radius_ok = False
    packing = sum(r**k for _, r in kept_orig) + \
        sum(b.radius**k for b in bad_out) + sum(scale**k for _ in new_goods)
    beta_max = max((fit.beta for (_, _, fit) in new_goods), default=0.0)
    # Eq.-style shifted-beta control at the good centers
    c_shift = 42.0 ** (k + 2) / math.log(2.0)
    shift_ok = beta_max <= c_shift * max(delta, 1e-12)
    h = lip = 0.0
    overlap = 0
    if sigma is not None and len(track):
        overlap = sigma.pou.overlap_count(track)
        for (g, rg, fit) in new_goods:
            nearby = track[space.norms(track - g[None, :]) <= 2.0 * rg]
            if len(nearby) >= 2:
                kind = projection_kind(space, k)
                pj = make_projection(space, fit.plane, kind)
                _, hh, ll = graph_check(space, nearby, fit.plane, pj)
                h = max(h, hh / rg)
                lip = max(lip, ll)
    labelled = (
        [{"kind": "good", "center": list(map(float, g)), "radius": float(rg)}
         for (g, rg, _) in new_goods]
        + [{"kind": "bad", "center": list(map(float, b.center)), "radius": float(b.radius)}
           for b in new_bads]
        + [{"kind": "original", "center": list(map(float, c)), "radius": float(r)}
           for c, r in new_orig])
    return StageReport(index, scale, len(new_goods), len(new_bads),
                       len(new_orig), beta_max, h, lip, overlap, disjoint,
                       radius_ok, packing, shift_ok, labelled)


def _leftover(space, mu, rs, kept_orig, bad_balls, goods, _unused, r_last):
    """mu(B_1(0) \\ F) with F the good-part (radius-restricted), original
    balls, and radius-restricted bad balls."""
    in_unit = space.norms(mu.points) <= 1.0
    covered = np.zeros(len(mu), dtype=bool)
    for c, r in kept_orig:
        covered |= space.norms(mu.points - np.asarray(c)[None, :]) < r
    for c, r in bad_balls:
        covered |= (space.norms(mu.points - np.asarray(c)[None, :]) <= r) & (rs < r)
    for item in goods:
        g, rg = (item[0], item[1]) if isinstance(item, tuple) else (item, r_last)
        covered |= (space.norms(mu.points - np.asarray(g)[None, :]) <= rg) & (rs < rg)
    return float(mu.weights[in_unit & ~covered].sum())


def _distortion(space, before, after, npairs):
    a = before[:npairs]
    b = before[npairs: 2 * npairs]
    fa = after[:npairs]
    fb = after[npairs: 2 * npairs]
    d0 = space.norms(a - b)
    d1 = space.norms(fa - fb)
    ok = d0 > 1e-9
    if not ok.any():
        return 1.0
    ratio = d1[ok] / d0[ok]
    ratio = ratio[ratio > 0]
    if len(ratio) == 0:
        return math.inf
    return float(max(ratio.max(), 1.0 / ratio.min()))


# ---------------------------------------------------------------------------
# main packing driver
# ---------------------------------------------------------------------------

@dataclass
class PackingLevel:
    index: int
    n_bad: int
    sum_bad: float
    sum_orig: float
    leftover: float
    claim_A_ok: bool
    claim_B_S_ok: bool
    claim_B_bad_ok: bool

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class PackingResult:
    kept_originals: list
    levels: list
    leftover_mass: float
    packing_sum: float
    valid: bool
    flags: list
    ledger: dict

    def to_dict(self):
        return {"kept_originals": [[list(map(float, c)), float(r)] for c, r in self.kept_originals],
                "levels": [l.to_dict() for l in self.levels],
                "leftover_mass": self.leftover_mass,
                "packing_sum": self.packing_sum,
                "valid": self.valid, "flags": self.flags, "ledger": self.ledger}


def main_packing(space: NormedSpace, mu: PointMeasure, S, r_s, k: int,
                 M: float, cfg: CoverConfig | None = None,
                 budget: int = 4, delta0: float = 0.1) -> PackingResult:
    """Rescale mu by delta0^2/M, run the covering lemma, and refine bad
    balls recursively per the inductive packing/measure claims; each level
    asserts claim A (measure) and claim B (packing) with the explicit
    constants.  Raises nothing on claim failure: results are flagged."""
    import dataclasses as _dc
    cfg = cfg or CoverConfig()
    # the per-atom M-hypothesis check is the covering precheck at delta0 on
    # the rescaled measure
    cfg = _dc.replace(cfg, delta=cfg.delta if cfg.delta is not None else delta0)
    chi = cfg.chi
    theta = cfg.theta if cfg.theta is not None else default_theta(k)
    S = np.asarray(S, dtype=int)
    rs = np.asarray(r_s, dtype=float).reshape(-1)
    flags = []
    scale = delta0**2 / M if M > 0 else 1.0
    # S has full measure by hypothesis: work with the S-submeasure, aligned
    # with rs, from here on
    mu_s = PointMeasure(mu.points[S].reshape(-1, space.dim), mu.weights[S] * scale) \
        if len(S) else PointMeasure(np.zeros((0, space.dim)), np.zeros(0))
    pts = mu_s.points
    ledger = cfg.ledger(space, k)
    ledger.update({"delta0": delta0, "M": M, "mass_scale": scale, "budget": budget})
    if M == 0 and len(S) and (rs > 0).all():
        # trivial path: beta = 0, Vitali cover of the original balls
        keep = _vitali_keep(space, pts, rs)
        kept = [(pts[j], rs[j]) for j in keep]
        lvl = PackingLevel(0, 0, 0.0, sum(r**k for _, r in kept), 0.0, True, True, True)
        return PackingResult(kept, [lvl], 0.0, sum(r**k for _, r in kept),
                             True, flags, ledger)
    chi_constraint = C.c5(k) * C.c_packing_count(k) * chi
    ledger["c5_cB_chi"] = chi_constraint
    if chi_constraint >= 0.5:
        flags.append("configured chi violates c5*c_B*chi < 1/2 (proof-chain constants); "
                     "claims asserted with measured sums")

    lab = classify_ball(space, mu_s, np.zeros(space.dim), 1.0, k, chi, theta)
    kept_all = []
    levels = []
    if lab.kind == "good":
        res = covering_lemma(space, mu_s, np.arange(len(mu_s)), rs, k, cfg)
        kept_all.extend(res.kept_originals)
        bads = [(b.center, b.radius, b) for b in res.bad_balls]
        flags.extend(f"level 0: {f}" for f in res.flags)
    else:
        bads = [(np.zeros(space.dim), 1.0, lab)]
    lv_left = _leftover(space, mu_s, rs, kept_all,
                        [(c, r) for (c, r, _) in bads], [], None, 0.0)
    levels.append(_packing_level(space, 0, kept_all, bads, lv_left, k, flags))
    valid = True
    for level in range(1, budget + 1):
        if not bads:
            break
        new_bads = []
        for (b_c, b_r, b_lab) in bads:
            mask_r = rs < b_r
            sub_mu = mu_s.subset(mask_r)
            fit = best_plane(space, sub_mu, b_c, b_r, k, seed=cfg.seed + level)
            V = fit.plane
            L = b_lab.witness_plane
            if L is None or L.k != max(k - 1, 0):
                L = _witness_plane(space, b_c, [], k)
            # original balls with chi r_b <= r_s < r_b near V (Vitali)
            d_to_V = distances_to_affine(space, V, pts)
            cand = np.where((rs >= chi * b_r) & (rs < b_r)
                            & (space.norms(pts - b_c[None, :]) <= 2 * b_r)
                            & (d_to_V < chi * b_r / 30.0))[0]
            keep = _vitali_keep(space, pts[cand], rs[cand])
            S_b = [(pts[cand[j]], rs[cand[j]]) for j in keep]
            kept_all.extend(S_b)
            # net near the witness (k-1)-plane
            d_to_L = distances_to_affine(space, L, pts) if L.k > 0 else \
                space.norms(pts - L.base[None, :])
            nm = ((space.norms(pts - b_c[None, :]) <= b_r)
                  & (d_to_L <= 10 * chi * b_r) & (d_to_V <= chi * b_r / 30.0)
                  & ~_in_any_ball(space, pts, S_b))
            net_pts = pts[nm]
            net = _farthest_net(space, net_pts, 2 * chi * b_r / 5.0)
            if len(net) > C.c_packing_count(k) * chi ** (1 - k):
                flags.append(f"level {level}: net size {len(net)} exceeds c_B chi^(1-k)")
            for j in net:
                x_c = net_pts[j]
                mask_j = rs < chi * b_r
                sub = covering_lemma(space, mu_s.subset(mask_j),
                                     np.arange(int(mask_j.sum())),
                                     rs[mask_j], k, cfg, center=x_c, radius=chi * b_r)
                kept_all.extend(sub.kept_originals)
                flags.extend(f"level {level}: {f}" for f in sub.flags)
                for bb in sub.bad_balls:
                    new_bads.append((bb.center, bb.radius, bb))
        bads = new_bads
        lv_left = _leftover(space, mu_s, rs, kept_all,
                            [(c, r) for (c, r, _) in bads], [], None, 0.0)
        levels.append(_packing_level(space, level, kept_all, bads, lv_left, k, flags))
    if bads:
        flags.append("recursion budget exhausted with bad balls remaining")
        valid = False
    leftover = levels[-1].leftover if levels else 0.0
    packing = sum(r**k for _, r in kept_all)
    if not all(l.claim_A_ok and l.claim_B_S_ok and l.claim_B_bad_ok for l in levels):
        valid = False
    return PackingResult(kept_all, levels, leftover, packing, valid, flags, ledger)


def _packing_level(space, index, kept_all, bads, leftover, k, flags):
    sum_bad = float(sum(r**k for (_, r, _) in bads))
    sum_orig = float(sum(r**k for _, r in kept_all))
    geo = sum(2.0**-j for j in range(index + 1))
    a_ok = leftover <= geo + 1e-12
    b_s = sum_orig <= 3**k * C.c2(k) * geo + 1e-12
    b_b = sum_bad <= 2.0**-index + 1e-12
    return PackingLevel(index, len(bads), sum_bad, sum_orig, leftover,
                        bool(a_ok), bool(b_s), bool(b_b))


# ---------------------------------------------------------------------------
# Reifenberg-flat parametrization
# ---------------------------------------------------------------------------

@dataclass
class ReifenbergReport:
    stages: list
    distortion: float
    holder_exponent: float
    q_alpha: float | None
    lip_constant_fit: float | None
    certified_delta: float

    def to_dict(self):
        return {"n_stages": len(self.stages), "distortion": self.distortion,
                "holder_exponent": self.holder_exponent, "q_alpha": self.q_alpha,
                "lip_constant_fit": self.lip_constant_fit,
                "certified_delta": self.certified_delta}


def reifenberg_flat_map(space: NormedSpace, Spts, k: int, chi: float = 0.01,
                        delta: float = 0.05, Q: float | None = None,
                        max_depth: int = 4, seed: int = 0,
                        pair_count: int = 400):
    """Build the bi-Hoelder/bi-Lipschitz parametrization of a Reifenberg-flat
    sample: per stage, a maximal 2 r_i/5 net on S, sup-beta best planes
    anchored at the net points, and the interpolated projection map.

    Returns (tau stages, ReifenbergReport).  Certification failure (some
    sampled beta_inf above delta) raises ValueError."""
    S = np.atleast_2d(np.asarray(Spts, dtype=float))
    alpha = space.smoothness_power()
    i0 = int(np.argmin(space.norms(S)))
    base_pt = S[i0]
    in_unit = space.norms(S) <= 1.0
    S1 = S[in_unit] if in_unit.any() else S
    # resolution: stop once scales fall below the sample spacing
    nn = _nearest_neighbor_scale(space, S1)
    certified = 0.0
    stage_scales = []
    r = chi
    for i in range(1, max_depth + 1):
        if r < 2.0 * nn:
            break
        stage_scales.append(r)
        r *= chi
    # certify flatness on capped net samples at every used scale (plus the top)
    cert_cap = 200
    for rr in [1.0] + stage_scales:
        net = _farthest_net(space, S1, 2.0 * rr / 5.0)[:cert_cap]
        for j in net:
            bi = beta_inf(space, S, S1[j], rr, k)
            certified = max(certified, bi.value)
            if bi.value > delta * (1 + 1e-9):
                raise ValueError(
                    f"flatness certification failed: beta_inf {bi.value:.3g} > delta {delta:.3g} "
                    f"at scale {rr}")
    top = beta_inf(space, S, base_pt, 1.0, k)
    T0 = top.plane
    sigmas = []
    for rr in stage_scales:
        net = _farthest_net(space, S1, 2.0 * rr / 5.0)
        centers = S1[net]
        planes = []
        for j in net:
            bi = beta_inf(space, S, S1[j], rr, k)
            planes.append(bi.plane)
        sigmas.append(build_sigma(space, centers, rr, planes, k))
    # beta_inf Dini sums for the Q bound
    q_meas = 0.0
    step = max(len(S1) // 64, 1)
    for j in range(0, len(S1), step):
        tot = 0.0
        for rr in [1.0] + stage_scales:
            tot += beta_inf(space, S, S1[j], rr, k).value ** alpha * math.log(1 / chi)
        q_meas = max(q_meas, tot)
    rng = np.random.default_rng(seed)
    coefs = rng.uniform(-0.9, 0.9, size=(2 * pair_count, max(k, 1)))
    P0 = T0.points(coefs[:, :k]) if k else np.repeat(T0.base[None, :], 2 * pair_count, axis=0)
    P1 = P0.copy()
    for s in sigmas:
        P1 = s.apply_many(P1)
    d0 = space.norms(P0[:pair_count] - P0[pair_count:])
    d1 = space.norms(P1[:pair_count] - P1[pair_count:])
    ok = (d0 > 1e-9) & (d1 > 0)
    distortion = float(max((d1[ok] / d0[ok]).max(), (d0[ok] / d1[ok]).max())) if ok.any() else 1.0
    # bi-Hoelder exponent from log-log regression
    if ok.sum() >= 2:
        lx, ly = np.log(d0[ok]), np.log(d1[ok])
        A = np.vstack([lx, np.ones_like(lx)]).T
        slope = float(np.linalg.lstsq(A, ly, rcond=None)[0][0])
    else:
        slope = 1.0
    q_alpha = Q**alpha if Q is not None else q_meas
    lip_fit = math.log(max(distortion, 1.0 + 1e-15)) / q_alpha if q_alpha > 0 else None
    report = ReifenbergReport(sigmas, distortion, slope, q_alpha, lip_fit, certified)
    return sigmas, report


def _nearest_neighbor_scale(space, S, cap: int = 512):
    if len(S) < 2:
        return 0.0
    idx = np.arange(len(S))
    if len(S) > cap:
        idx = np.linspace(0, len(S) - 1, cap).astype(int)
    D = space.norms(S[idx][:, None, :] - S[None, :, :])
    D[D <= 0] = np.inf
    return float(np.median(D.min(axis=1)))
