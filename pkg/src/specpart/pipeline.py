"""Stage orchestration: symbol -> projections -> quantize -> spectra -> diagnostics.

Stages run in dependency order, reusing the spectrum cache and a projection
bundle cache keyed by content digests.  Every produced file is listed in
manifest.json with its sha256; reports are byte-deterministic for a fixed
config + seed (stable mode order, fixed reduction order, seeded randomness).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import RunConfig, config_digest, resolve_cache_dir
from .eigenstructure import eigendecompose_principal, verify_projection_partition
from .errors import CacheCorruptError, CacheMissError, ComputationError, SpecpartError
from .hyperbolic import (
    commutator_diagnostic,
    gaussian_packet,
    hamiltonian_flow,
    propagator_apply,
    sqrt_commutator_diagnostic,
    track_singularity,
)
from .partition import (
    build_semiaxis_partition,
    classify_eigenfunctions,
    distance_stats,
    match_series,
    partition_exponents,
)
from .projections import build_Aj, build_projections, quantized_defect_decay
from .quantization import model_operator, quantize, symbol_digest
from .spectral import cached_spectrum
from .symbols import Symbol, symbol_dump, symbol_from_bytes, symbol_to_bytes
from .weyl import (
    density_linear_fit,
    empirical_weyl_fit,
    mollified_density,
    weyl_leading,
    weyl_second,
)
from .spectral import heat_trace
from math import gamma as gamma_fn

_PROJ_MAGIC = b"SPPRJ1"


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    ok: bool

    def as_dict(self) -> dict:
        return {"value": self.value, "threshold": self.threshold, "pass": self.ok}


@dataclass
class StageResult:
    name: str
    files: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    cached: bool = False


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_json(path: str, data) -> None:
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class OutputLock:
    """Single-writer ownership of the output directory."""

    def __init__(self, outdir: str):
        self.path = os.path.join(outdir, ".lock")

    def __enter__(self):
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ComputationError(
                f"output directory is locked by another run ({self.path})"
            ) from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        if os.path.exists(self.path):
            os.unlink(self.path)
        return False


class Pipeline:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.outdir = cfg.output_dir
        self.cache_dir = resolve_cache_dir(cfg)
        self.digest = config_digest(cfg)
        os.makedirs(self.outdir, exist_ok=True)
        self._symbol = None
        self._decomp = None
        self._pset = None
        self._ajs = None
        self._proj_cached = False
        self._records = {}
        self._spectrum_hits = []

    # ---------------- shared lazily built artifacts ----------------

    @property
    def symbol(self) -> Symbol:
        if self._symbol is None:
            self._symbol = model_operator(
                self.cfg.model, depth=self.cfg.depth, **self.cfg.model_params()
            )
        return self._symbol

    @property
    def decomp(self):
        if self._decomp is None:
            xb, tb = self.cfg.bands()
            self._decomp = eigendecompose_principal(
                self.symbol.principal, gap_tol=self.cfg.gap_tol,
                x_band=xb, theta_band=tb, band_tol=self.cfg.band_tol,
            )
        return self._decomp

    def _proj_key(self) -> str:
        xb, tb = self.cfg.bands()
        h = hashlib.sha256()
        h.update(symbol_digest(self.symbol).encode())
        h.update(
            f"|K={self.cfg.depth}|xb={xb}|tb={tb}|btol={self.cfg.band_tol!r}"
            f"|rtol={self.cfg.res_tol!r}".encode()
        )
        return h.hexdigest()

    def projections(self):
        if self._pset is None:
            loaded = None
            if self.cache_dir:
                loaded = _load_projection_bundle(self.cache_dir, self._proj_key(),
                                                 self.symbol, self.decomp, self.cfg)
            if loaded is not None:
                self._pset, self._ajs = loaded
                self._proj_cached = True
            else:
                xb, tb = self.cfg.bands()
                self._pset = build_projections(
                    self.symbol, self.cfg.depth, decomp=self.decomp,
                    x_band=xb, theta_band=tb, band_tol=self.cfg.band_tol,
                    res_tol=self.cfg.res_tol,
                )
                self._ajs = build_Aj(self.symbol, self._pset,
                                     band_tol=self.cfg.band_tol)
                if self.cache_dir:
                    _store_projection_bundle(self.cache_dir, self._proj_key(),
                                             self._pset, self._ajs)
        return self._pset, self._ajs

    def record(self, sym: Symbol, lam: int, with_vectors: bool):
        key = (symbol_digest(sym), lam, with_vectors)
        if key not in self._records:
            q = quantize(sym, lam)
            rec, hit = cached_spectrum(
                q, self.cache_dir, trust_frac=self.cfg.trust_frac,
                h_min=self.decomp.h_min, with_vectors=with_vectors,
            )
            self._records[key] = rec
            self._spectrum_hits.append(hit)
        return self._records[key]

    # ---------------- stages ----------------

    def stage_check_symbols(self) -> StageResult:
        res = StageResult("check-symbols")
        a = self.symbol
        dec = self.decomp
        rep = verify_projection_partition(dec, a.principal)

        rng = np.random.default_rng(self.cfg.seed)
        pts = rng.uniform(0.0, 2 * np.pi, size=(32, 2))
        xi = rng.uniform(-2.0, 2.0, size=(32, 2))
        xi[np.hypot(xi[:, 0], xi[:, 1]) < 0.3] += 1.0
        hom_dev = 0.0
        for aa in (2.0, 3.7):
            va = a.principal.eval_points(pts[:, 0], pts[:, 1], aa * xi[:, 0], aa * xi[:, 1])
            v = a.principal.eval_points(pts[:, 0], pts[:, 1], xi[:, 0], xi[:, 1])
            hom_dev = max(hom_dev, float(np.max(np.abs(va - aa ** a.order * v))))

        data = {
            "model": self.cfg.model,
            "order": a.order,
            "depth": a.depth,
            "m": a.m,
            "m_plus": dec.m_plus,
            "m_minus": dec.m_minus,
            "h_min": dec.h_min,
            "gap": dec.gap,
            "component_norms": a.component_norms(),
            "projection_partition": rep,
            "homogeneity_deviation": hom_dev,
        }
        path = os.path.join(self.outdir, "symbol_report.json")
        write_json(path, data)
        res.files.append(path)
        spath = os.path.join(self.outdir, "a_symbol.spsym")
        with open(spath, "wb") as fh:
            fh.write(symbol_to_bytes(a))
        res.files.append(spath)
        dpath = os.path.join(self.outdir, "a_symbol_dump.txt")
        with open(dpath, "w") as fh:
            fh.write(symbol_dump(a))
        res.files.append(dpath)
        res.checks = [
            Check("symbol.homogeneity", hom_dev, 1e-10, hom_dev <= 1e-10),
            Check("symbol.partition_of_unity", rep["sum_identity"], 1e-10,
                  rep["sum_identity"] <= 1e-10),
            Check("symbol.gap_positive", dec.gap, 0.0, dec.gap > 0.0),
        ]
        return res

    def stage_spectrum(self) -> StageResult:
        res = StageResult("spectrum")
        rows = []
        before = len(self._spectrum_hits)
        for lam in self.cfg.lambdas:
            rec = self.record(self.symbol, lam, with_vectors=False)
            pos = rec.positive()
            rows.append({
                "lambda": lam,
                "size": rec.size,
                "trusted_max": rec.trusted_max,
                "n_positive": int(len(pos)),
                "n_trusted": int(len(rec.positive(trusted_only=True))),
                "max_eigenvalue": float(rec.eigenvalues[-1]),
                "min_eigenvalue": float(rec.eigenvalues[0]),
            })
        res.cached = all(self._spectrum_hits[before:]) and len(self._spectrum_hits) > before
        path = os.path.join(self.outdir, "spectra.json")
        write_json(path, {"records": rows})
        res.files.append(path)
        res.checks = [Check("spectrum.computed", float(len(rows)),
                            float(len(self.cfg.lambdas)),
                            len(rows) == len(self.cfg.lambdas))]
        return res

    def stage_partition(self) -> StageResult:
        res = StageResult("partition")
        cfg = self.cfg
        lam_p = cfg.partition_lambda or max(cfg.lambdas)
        pset, ajs = self.projections()
        res.cached = self._proj_cached

        rlpath = os.path.join(self.outdir, "residual_log.csv")
        write_csv(rlpath, ["order", "family", "j", "l", "norm"], pset.residual_table())
        res.files.append(rlpath)
        for j in pset.indices:
            ppath = os.path.join(self.outdir, f"projection_{_jtag(j)}.spsym")
            with open(ppath, "wb") as fh:
                fh.write(symbol_to_bytes(pset.projection(j)))
            res.files.append(ppath)

        rec_a = self.record(self.symbol, lam_p, with_vectors=True)
        rec_js = {j: self.record(aj, lam_p, with_vectors=False) for j, aj in ajs.items()}

        beta, gamma_exp = partition_exponents(cfg.alpha, self.symbol.order, 2.0)
        match = match_series(rec_a, rec_js, cfg.alpha, self.symbol.order, 2.0,
                             n_max=cfg.n_max)
        dstats = distance_stats(rec_a, rec_js)
        proj_q = {j: quantize(pset.projection(j), lam_p) for j in pset.indices}
        labels = classify_eigenfunctions(rec_a, proj_q)

        rows = []
        lab_by_pos = {i: (labels.label[i], labels.dominance[i]) for i in range(len(labels.k))}
        for i, k in enumerate(match.k):
            lab, dom = lab_by_pos.get(i, (0, float("nan")))
            rows.append((int(k) + 1, match.lam[i], int(lab), dom,
                         match.mu[i], match.residual[i]))
        cpath = os.path.join(self.outdir, "partition.csv")
        write_csv(cpath, ["k", "lambda_k", "label", "dominance",
                          "mu_k_plus_r", "residual"], rows)
        res.files.append(cpath)

        part = match.partition
        summary = {
            "lambda": lam_p,
            "alpha": cfg.alpha,
            "beta": part.beta,
            "gamma": part.gamma,
            "beta_closed_form": beta,
            "gamma_closed_form": gamma_exp,
            "r_alpha": match.r_alpha,
            "candidates": list(match.candidates),
            "stabilization_n": match.stabilization_n,
            "mismatch_after": list(match.mismatch_after),
            "empirical_C": part.empirical_c,
            "nu_strictly_increasing": bool(np.all(np.diff(part.nu) > 0)),
            "interval_fit_exponent": part.length_fit_exponent(),
            "interval_fit_target": -cfg.alpha * 2.0 / self.symbol.order,
            "residual_slope": match.residual_slope(),
            "max_residual_defect": pset.max_residual(),
            "distance_per_branch": {str(k): v for k, v in dstats.per_branch.items()},
            "distance_merged": dstats.merged,
            "negative_mass_max": float(np.max(labels.negative_mass))
            if len(labels.negative_mass) else 0.0,
            "unclassifiable": int(np.sum(labels.unclassifiable)),
        }
        spath = os.path.join(self.outdir, "partition_summary.json")
        write_json(spath, summary)
        res.files.append(spath)

        res.checks = [
            Check("partition.defects", pset.max_residual(), cfg.res_tol,
                  pset.max_residual() <= cfg.res_tol),
            Check("partition.nu_increasing", 1.0 if summary["nu_strictly_increasing"] else 0.0,
                  1.0, summary["nu_strictly_increasing"]),
            Check("partition.empirical_C_positive", part.empirical_c, 0.0,
                  part.empirical_c > 0.0),
            Check("partition.unclassifiable", float(summary["unclassifiable"]), 0.0,
                  summary["unclassifiable"] == 0),
        ]
        return res

    def stage_weyl(self) -> StageResult:
        res = StageResult("weyl")
        cfg = self.cfg
        lam_w = max(cfg.lambdas)
        s = self.symbol.order
        d = 2.0
        rec = self.record(self.symbol, lam_w, with_vectors=False)

        lead = weyl_leading(self.decomp, s=s)
        fit = empirical_weyl_fit(rec, d, s)
        ht = heat_trace(rec, cfg.heat_t)
        ht_scaled = cfg.heat_t ** (d / s) * ht
        ht_target = lead.b_total * gamma_fn(d / s + 1.0)

        grid = np.linspace(rec.trusted_max * 0.1, rec.trusted_max, cfg.density_points)
        dens = mollified_density(rec, grid, t0=cfg.t0)
        a1_total = lead.a1_integral_total
        window = (rec.trusted_max / 2.0, rec.trusted_max)
        if s == 1.0:
            a1_fit, a0_fit = density_linear_fit(dens, window)
        else:
            a1_fit, a0_fit = float("nan"), float("nan")

        data = {
            "lambda": lam_w,
            "s": s,
            "b_total": lead.b_total,
            "b_per_j": {str(k): v for k, v in lead.b_per_j.items()},
            "a1_integral_per_j": {str(k): v for k, v in lead.a1_integral_per_j.items()},
            "a1_integral_total": a1_total,
            "remark_identity_gap": lead.remark_identity_gap(),
            "empirical_b": fit.empirical_b,
            "empirical_slope": fit.slope,
            "fit_window": list(fit.window),
            "heat_t": cfg.heat_t,
            "heat_trace_scaled": ht_scaled,
            "heat_trace_target": ht_target,
            "density_leading_fit": a1_fit,
            "density_constant_fit": a0_fit,
        }
        if s == 1.0:
            pset, _ = self.projections()
            second = weyl_second(self.symbol, pset)
            data["a2_integral_per_j"] = {str(k): v for k, v in second.a2_integral_per_j.items()}
            data["a2_integral_total"] = second.a2_integral_total
            data["a2_imag_residual"] = second.imag_residual
        path = os.path.join(self.outdir, "weyl.json")
        write_json(path, data)
        res.files.append(path)

        dpath = os.path.join(self.outdir, "density.csv")
        write_csv(dpath, ["lambda", "density"],
                  list(zip(dens.grid, dens.density)))
        res.files.append(dpath)

        rel_b = abs(fit.empirical_b - lead.b_total) / lead.b_total
        rel_slope = abs(fit.slope - d / s) / (d / s)
        rel_heat = abs(ht_scaled - ht_target) / ht_target
        res.checks = [
            Check("weyl.empirical_b", rel_b, 0.05, rel_b <= 0.05),
            Check("weyl.slope", rel_slope, 0.02, rel_slope <= 0.02),
            Check("weyl.heat_trace", rel_heat, 0.05, rel_heat <= 0.05),
            Check("weyl.remark_identity", lead.remark_identity_gap(), 1e-8,
                  lead.remark_identity_gap() <= 1e-8),
        ]
        if s == 1.0:
            rel_dens = abs(a1_fit - a1_total) / a1_total
            res.checks.append(Check("weyl.density_leading", rel_dens, 0.10,
                                    rel_dens <= 0.10))
        return res

    def stage_evolve(self) -> StageResult:
        res = StageResult("evolve")
        cfg = self.cfg
        lam_h = cfg.hyperbolic_lambda or max(cfg.lambdas)
        pset, _ = self.projections()
        rec = self.record(self.symbol, lam_h, with_vectors=True)
        proj_q = {j: quantize(pset.projection(j), lam_h) for j in pset.indices}
        second_order = abs(self.symbol.order - 2.0) < 1e-12

        rng = np.random.default_rng(cfg.seed + 1)
        probe = rng.standard_normal((rec.size, 8)) + 1j * rng.standard_normal((rec.size, 8))
        probe /= np.linalg.norm(probe, axis=0)
        unit_dev = float(np.max(np.abs(
            np.linalg.norm(propagator_apply(rec, cfg.evolve_t, probe), axis=0) - 1.0)))
        back = propagator_apply(rec, -cfg.evolve_t,
                                propagator_apply(rec, cfg.evolve_t, probe))
        group_dev = float(np.max(np.linalg.norm(back - probe, axis=0)))

        shells = [r for r in cfg.shells if r + 1 < lam_h]
        diag = commutator_diagnostic(rec, proj_q, shells, t=cfg.evolve_t,
                                     seed=cfg.seed + 2)
        sh_rows = []
        for j in diag.commutator:
            for rho, v in zip(diag.shells, diag.commutator[j]):
                sh_rows.append((j, rho, "commutator", v))
        for (l, j), vals in diag.cross.items():
            for rho, v in zip(diag.shells, vals):
                sh_rows.append((f"{l}|{j}", rho, "cross", v))
        shpath = os.path.join(self.outdir, "shell_diagnostics.csv")
        write_csv(shpath, ["j", "shell", "kind", "norm"], sh_rows)
        res.files.append(shpath)

        tracks = {}
        for f in self.decomp.positive:
            eta = np.asarray(cfg.packet_eta, dtype=float)
            pol = f.projector.eval_points([0.0], [0.0], [eta[0]], [eta[1]])[0]
            w = pol @ np.ones(self.symbol.m) / max(
                np.linalg.norm(pol @ np.ones(self.symbol.m)), 1e-12)
            freq = float(np.hypot(eta[0], eta[1]))
            # widen so the declared band fits inside the lattice
            sigma_x = max(freq ** -0.5, 4.0 / max(lam_h - freq, 1.0))
            packet = gaussian_packet(lam_h, self.symbol.m, (np.pi, np.pi), eta, w,
                                     sigma_x=sigma_x)
            track = track_singularity(rec, packet, f.h, cfg.packet_times,
                                      sqrt_n=1 if second_order else 0)
            tracks[f.index] = track
            tpath = os.path.join(self.outdir, f"trajectory_{_jtag(f.index)}.csv")
            traj = hamiltonian_flow(f.h, (np.pi, np.pi), eta,
                                    float(max(abs(t) for t in cfg.packet_times)), 256)
            write_csv(tpath, ["t", "x1", "x2", "xi1", "xi2", "h_drift"],
                      zip(traj.t, traj.x[:, 0], traj.x[:, 1],
                          traj.xi[:, 0], traj.xi[:, 1], traj.h_drift))
            res.files.append(tpath)

        sqrt_slopes = {}
        if second_order:
            sdiag = sqrt_commutator_diagnostic(rec, proj_q, shells, seed=cfg.seed + 3)
            sqrt_slopes = {str(j): v for j, v in sdiag.slopes.items()}

        data = {
            "lambda": lam_h,
            "t": cfg.evolve_t,
            "unitarity_deviation": unit_dev,
            "group_law_deviation": group_dev,
            "shells": list(diag.shells),
            "commutator": {str(j): list(v) for j, v in diag.commutator.items()},
            "cross": {f"{l}|{j}": list(v) for (l, j), v in diag.cross.items()},
            "slopes": {str(j): v for j, v in diag.slopes.items()},
            "sqrt_slopes": sqrt_slopes,
            "packet": {
                str(j): {
                    "times": list(map(float, t.times)),
                    "max_discrepancy": t.max_discrepancy,
                    "sigma_x": t.sigma_x,
                    "min_band_mass": t.min_band_mass,
                    "centers": t.centers.tolist(),
                    "flow_centers": t.flow_centers.tolist(),
                }
                for j, t in tracks.items()
            },
        }
        path = os.path.join(self.outdir, "evolve.json")
        write_json(path, data)
        res.files.append(path)

        worst_track = max(t.max_discrepancy / t.sigma_x for t in tracks.values())
        res.checks = [
            Check("evolve.unitarity", unit_dev, 1e-9, unit_dev <= 1e-9),
            Check("evolve.group_law", group_dev, 1e-9, group_dev <= 1e-9),
            Check("evolve.packet_tracking", worst_track, 1.0, worst_track <= 1.0),
        ]
        return res

    def stage_report(self, prior: list) -> StageResult:
        res = StageResult("report")
        summary = {
            "version": __version__,
            "config_digest": self.digest,
            "model": self.cfg.model,
            "checks": {},
            "stages": [st.name for st in prior],
        }
        for st in prior:
            for c in st.checks:
                summary["checks"][c.name] = c.as_dict()
        for name in ("symbol_report", "spectra", "partition_summary", "weyl", "evolve"):
            path = os.path.join(self.outdir, f"{name}.json")
            if os.path.exists(path):
                with open(path) as fh:
                    summary[name] = json.load(fh)
        path = os.path.join(self.outdir, "report.json")
        write_json(path, summary)
        res.files.append(path)
        try:
            from .figures import render_figures

            res.files.extend(render_figures(self.outdir))
        except ImportError:
            pass
        res.checks = [Check("report.written", 1.0, 1.0, True)]
        return res

    # ---------------- driver ----------------

    def run(self, stages=None) -> tuple:
        cfg_stages = self.cfg.enabled_stages()
        stages = list(stages) if stages is not None else cfg_stages
        results = []
        with OutputLock(self.outdir):
            for name in stages:
                if name == "check-symbols":
                    results.append(self.stage_check_symbols())
                elif name == "spectrum":
                    results.append(self.stage_spectrum())
                elif name == "partition":
                    results.append(self.stage_partition())
                elif name == "weyl":
                    results.append(self.stage_weyl())
                elif name == "evolve":
                    results.append(self.stage_evolve())
                elif name == "report":
                    results.append(self.stage_report(results))
                else:
                    raise ComputationError(f"unknown stage {name!r}")
            manifest = self._write_manifest(results)
        ok = all(c.ok for st in results for c in st.checks)
        return (0 if ok else 1), manifest

    def _write_manifest(self, results) -> dict:
        files = {}
        for st in results:
            for path in st.files:
                files[os.path.relpath(path, self.outdir)] = sha256_file(path)
        manifest = {
            "config_digest": self.digest,
            "version": __version__,
            "files": dict(sorted(files.items())),
            "stages": {
                st.name: {
                    "cached": st.cached,
                    "checks": {c.name: c.as_dict() for c in st.checks},
                }
                for st in results
            },
        }
        write_json(os.path.join(self.outdir, "manifest.json"), manifest)
        return manifest


def _jtag(j: int) -> str:
    return f"p{j}" if j > 0 else f"m{-j}"


# ---------------------------------------------------------------------------
# projection bundle cache
# ---------------------------------------------------------------------------

def _store_projection_bundle(cache_dir, key, pset, ajs):
    os.makedirs(cache_dir, exist_ok=True)
    header = {
        "indices": list(pset.indices),
        "depth": pset.depth,
        "res_tol": pset.res_tol,
        "residual_log": pset.residual_table(),
        "aj_indices": sorted(ajs),
    }
    blob = io.BytesIO()
    blob.write(_PROJ_MAGIC)
    hdr = json.dumps(header, sort_keys=True).encode()
    blob.write(struct.pack("<I", len(hdr)))
    blob.write(hdr)
    for j in pset.indices:
        raw = symbol_to_bytes(pset.projection(j))
        blob.write(struct.pack("<Q", len(raw)))
        blob.write(raw)
    for j in sorted(ajs):
        raw = symbol_to_bytes(ajs[j])
        blob.write(struct.pack("<Q", len(raw)))
        blob.write(raw)
    payload = blob.getvalue()
    digest = hashlib.sha256(payload).digest()
    path = os.path.join(cache_dir, f"{key}.proj")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
        fh.write(digest)
    os.replace(tmp, path)


def _load_projection_bundle(cache_dir, key, source, decomp, cfg):
    from .projections import ProjectionSet, ResidualRow

    path = os.path.join(cache_dir, f"{key}.proj")
    if not os.path.exists(path):
        return None
    with open(path, "rb") as fh:
        raw = fh.read()
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest or payload[:6] != _PROJ_MAGIC:
        raise CacheCorruptError(f"projection bundle {key} fails verification")
    off = 6
    (hlen,) = struct.unpack_from("<I", payload, off)
    off += 4
    header = json.loads(payload[off:off + hlen].decode())
    off += hlen

    def next_symbol():
        nonlocal off
        (n,) = struct.unpack_from("<Q", payload, off)
        off2 = off + 8
        sym = symbol_from_bytes(payload[off2:off2 + n])
        return sym, off2 + n

    projections = []
    for _ in header["indices"]:
        sym, off = next_symbol()
        projections.append(sym)
    ajs = {}
    for j in header["aj_indices"]:
        sym, off = next_symbol()
        ajs[j] = sym
    log = tuple(ResidualRow(int(o), f, int(j), int(l), float(v))
                for o, f, j, l, v in header["residual_log"])
    pset = ProjectionSet(
        source=source, decomp=decomp, indices=tuple(header["indices"]),
        projections=tuple(projections), residual_log=log,
        depth=int(header["depth"]), res_tol=float(header["res_tol"]),
    )
    return pset, ajs


def run_config(cfg: RunConfig, stages=None) -> tuple:
    """Entry point shared by CLI subcommands; returns (status, manifest)."""
    pipe = Pipeline(cfg)
    return pipe.run(stages)
