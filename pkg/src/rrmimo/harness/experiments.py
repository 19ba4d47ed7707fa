"""Monte Carlo experiments behind the presets.

Every trial draws from its own stream ``trial_rng(seed, scenario, trial,
stream, ...)``, so results do not depend on how trials are split across
worker threads.  Workers only compute; rows are appended by the caller in a
fixed order.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..bases import Basis, basis_klt, make_basis, truncate
from ..channel import (ArrayGeometry, SpatialCorrelation, beta_for_snr, correlation_analytic,
                       draw_channels, make_pilot, project_psd, steering_vector, synthesize_rx)
from ..errors import DomainError, InfeasibleSupportError
from ..estimators import (MatchedFilterOutput, estimate_beta, estimate_correlation,
                          estimate_mmse, estimate_rr_lpm, matched_filter)
from ..rank import imod
from ..rng import complex_normal, trial_rng
from ..spectrum import (aligned_correlation, best_window, captured_fraction, channel_spectrum,
                        dominant_support, imag_leakage, mse_curve, optimal_order,
                        theoretical_nmse)
from .config import ExperimentConfig, Scenario
from .results import FAILURE_MARKER, ResultTable, batch_mean_se

# stream ids under (seed, scenario, trial)
S_CHANNEL, S_NOISE, S_BLOCK_CHANNEL, S_BLOCK_NOISE = 0, 1, 2, 3


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class RunResult:
    table: ResultTable
    checks: list[Check] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)


def db_to_lin(a_db: float) -> float:
    return 10.0 ** (a_db / 10.0)


def parallel_trials(fn: Callable[[int], object], n: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(n-1)]`` evaluated on ``threads`` workers, in trial order."""
    if threads <= 1 or n <= 1:
        return [fn(t) for t in range(n)]
    chunks = np.array_split(np.arange(n), min(threads, n))
    with ThreadPoolExecutor(max_workers=threads) as ex:
        parts = list(ex.map(lambda idx: [fn(int(t)) for t in idx], chunks))
    return [r for part in parts for r in part]


@dataclass
class _Setup:
    geom: ArrayGeometry
    clusters: list | None
    corr: np.ndarray
    phi: float | None          # true mean AoA used for alignment, or None

    @property
    def M(self) -> int:
        return self.geom.M


def _setup(cfg: ExperimentConfig, sc: Scenario, align: bool = True) -> _Setup:
    geom = cfg.geometry()
    clusters = sc.cluster_specs(cfg.num_subpaths, cfg.aoa_distribution)
    if clusters is None:
        return _Setup(geom, None, np.eye(geom.M, dtype=complex), None)
    corr = correlation_analytic(geom, clusters).phi
    phi = math.radians(sc.mean_aoa_deg) if align and cfg.lpm else None
    return _Setup(geom, clusters, corr, phi)


def _basis(kind: str, st: _Setup, corr=None) -> Basis:
    """Basis for ``kind``; the KLT is taken of the (aligned) ``corr``."""
    corr = st.corr if corr is None else corr
    if kind == "klt":
        return basis_klt(aligned_correlation(corr, st.phi, st.geom))
    return make_basis(kind, st.M)


def _draw_block(cfg: ExperimentConfig, si: int, t: int, st: _Setup, pilot) -> tuple[np.ndarray, np.ndarray]:
    """Channel and ``(M, T)`` noise block of one trial."""
    h = draw_channels(st.geom, st.clusters, 1, trial_rng(cfg.seed, si, t, S_CHANNEL))[:, 0]
    N = complex_normal(trial_rng(cfg.seed, si, t, S_NOISE), (st.M, pilot.num_symbols))
    return h, N


def _draw_trial(cfg: ExperimentConfig, si: int, t: int, st: _Setup, pilot) -> tuple[np.ndarray, np.ndarray]:
    """Channel and pilot-domain noise ``N p`` of one trial."""
    h, N = _draw_block(cfg, si, t, st, pilot)
    return h, N @ pilot.pilot


def _estimated_corr(cfg: ExperimentConfig, si: int, t: int, st: _Setup, pilot, beta: float,
                    J: int) -> SpatialCorrelation:
    """Correlation estimate from ``J`` independent pilot blocks of one trial."""
    blocks = []
    for j in range(J):
        h = draw_channels(st.geom, st.clusters, 1,
                          trial_rng(cfg.seed, si, t, S_BLOCK_CHANNEL, j))[:, 0]
        Y = synthesize_rx(h, beta, pilot, seed=trial_rng(cfg.seed, si, t, S_BLOCK_NOISE, j))
        blocks.append((Y, pilot))
    return estimate_correlation(blocks, math.sqrt(beta) * pilot.pilot_energy)


def _new_table(cfg: ExperimentConfig) -> ResultTable:
    return ResultTable(cfg.name, cfg.seed, cfg.config_hash())


def _fmt_windows(windows) -> str:
    return "+".join(f"[{a + 1},{b}]" for a, b in windows)


# ---------------------------------------------------------------- MSE sweep

def run_mse_sweep(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Simulated and closed-form NMSE per (scenario, basis, alpha, m)."""
    table = _new_table(cfg)
    pilot = make_pilot(cfg.pilot_length)[0]
    energy = pilot.pilot_energy
    for si, sc in enumerate(cfg.scenarios):
        st = _setup(cfg, sc)
        M = st.M
        draws = parallel_trials(lambda t: _draw_trial(cfg, si, t, st, pilot), cfg.trials, threads)
        H = np.stack([d[0] for d in draws], axis=1)
        NP = np.stack([d[1] for d in draws], axis=1)
        w = steering_vector(st.geom, st.phi) if st.phi is not None else np.ones(M)
        for kind in cfg.bases:
            basis = _basis(kind, st)
            spec = channel_spectrum(basis, st.corr, st.phi, st.geom)
            for a_db in cfg.alpha_db:
                beta = beta_for_snr(db_to_lin(a_db), pilot)
                gamma = math.sqrt(beta) * energy
                YP = gamma * H + NP
                if cfg.known_beta:
                    g = np.full(cfg.trials, gamma)
                else:
                    g = np.array([math.sqrt(estimate_beta(YP[:, t], energy)) * energy
                                  for t in range(cfg.trials)])
                for m in cfg.orders:
                    if m == 0:
                        support = range(0)
                        Hh = np.zeros_like(H)
                    else:
                        _, k = best_window(spec.diag_b, m)
                        support = range(k, k + m)
                        cols = basis.q[:, k:k + m]
                        if cfg.known_phi or st.phi is None:
                            Z = w.conj()[:, None] * YP
                            Hh = w[:, None] * (cols @ (cols.conj().T @ Z)) / g
                        else:
                            trunc = truncate(basis, support)

                            def one(t):
                                mf = MatchedFilterOutput(YP[:, t], g[t], energy)
                                return estimate_rr_lpm(mf, trunc, cfg.grid_deg, st.geom).h_hat

                            Hh = np.stack(parallel_trials(one, cfg.trials, threads), axis=1)
                    err = np.sum(np.abs(Hh - H) ** 2, axis=0) / M
                    mean, se = batch_mean_se(err)
                    common = dict(scenario=sc.label, basis=kind, alpha_db=a_db, m=m)
                    table.add("nmse_sim", mean, stderr=se, **common)
                    table.add("nmse_theory", theoretical_nmse(spec, support, beta, energy), **common)
    return table


def check_mse_sweep(table: ResultTable, cfg: ExperimentConfig) -> list[Check]:
    checks = []
    exact = cfg.known_beta and (cfg.known_phi or not cfg.lpm)
    iid = all(sc.clusters is None for sc in cfg.scenarios)
    k = 3.0 if iid else 5.0
    if exact:
        worst, where = 0.0, ""
        for r in table.select(metric="nmse_sim"):
            th = table.value(metric="nmse_theory", scenario=r["scenario"], basis=r["basis"],
                             alpha_db=r["alpha_db"], m=r["m"])
            z = abs(r["value"] - th) / r["stderr"]
            if z > worst:
                worst, where = z, f"{r['scenario']}/{r['basis']}/alpha={r['alpha_db']}/m={r['m']}"
        checks.append(Check(f"simulation within {k:g} SE of theory", worst <= k,
                            f"max |z| = {worst:.2f} at {where}"))
    if cfg.name == "fig4":
        lo = min(cfg.alpha_db)
        a = table.value(metric="nmse_sim", alpha_db=lo, m=20, basis="polynomial",
                        scenario=cfg.scenarios[0].label)
        b = table.value(metric="nmse_sim", alpha_db=lo, m=100, basis="polynomial",
                        scenario=cfg.scenarios[0].label)
        checks.append(Check("m=20 beats m=100 at low SNR", a < b, f"{a:.4g} vs {b:.4g}"))
    if cfg.name == "fig5":
        best = {}
        for a_db in (min(cfg.alpha_db), max(cfg.alpha_db)):
            rows = table.select(metric="nmse_theory", alpha_db=a_db, basis="dct2")
            best[a_db] = min(rows, key=lambda r: r["value"])["m"]
        lo, hi = best[min(cfg.alpha_db)], best[max(cfg.alpha_db)]
        checks.append(Check("best order grows with SNR", hi > lo, f"m_best {lo} -> {hi}"))
    return checks


# ---------------------------------------------------------------- spectra

def run_spectrum_report(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Aligned and unaligned spectra with their dominant supports."""
    table = _new_table(cfg)
    for sc in cfg.scenarios:
        st = _setup(cfg, sc)
        if st.phi is not None:
            table.add("imag_leakage", imag_leakage(st.corr, st.phi, st.geom), scenario=sc.label)
        for kind in cfg.bases:
            aligned = channel_spectrum(_basis(kind, st), st.corr, st.phi, st.geom)
            raw_basis = basis_klt(st.corr) if kind == "klt" else make_basis(kind, st.M)
            unaligned = channel_spectrum(raw_basis, st.corr)
            for name, spec in (("aligned", aligned), ("unaligned", unaligned)):
                for i, v in enumerate(spec.diag_b):
                    table.add(f"b_{name}", v, scenario=sc.label, basis=kind, x=i + 1)
                for eta in cfg.etas:
                    sup = dominant_support(spec, eta)
                    common = dict(scenario=sc.label, basis=kind, eta=eta)
                    table.add(f"m_eta_{name}", sup.m, note=_fmt_windows(sup.windows), **common)
                    table.add(f"support_start_{name}", sup.windows[0][0] + 1, **common)
    return table


def check_spectrum_report(table: ResultTable, cfg: ExperimentConfig) -> list[Check]:
    checks = []

    def m_of(sc, kind, eta, which="aligned"):
        return table.value(metric=f"m_eta_{which}", scenario=sc.label, basis=kind, eta=eta)

    eta0 = cfg.etas[0]
    for sc in cfg.scenarios:
        if "dct2" in cfg.bases:
            a, u = m_of(sc, "dct2", eta0), m_of(sc, "dct2", eta0, "unaligned")
            start = table.value(metric="support_start_aligned", scenario=sc.label, basis="dct2",
                                eta=eta0)
            checks.append(Check(f"{sc.label}: aligned DCT support starts at index 1", start == 1,
                                f"start {start}"))
            if sc.mean_aoa_deg:
                checks.append(Check(f"{sc.label}: aligned/unaligned DCT support ratio <= 0.6",
                                    a / u <= 0.6, f"{a}/{u} = {a / u:.3f}"))
            else:
                checks.append(Check(f"{sc.label}: aligned DCT support no longer than unaligned",
                                    a <= u, f"{a} vs {u}"))
        order = [k for k in ("klt", "dct2", "polynomial") if k in cfg.bases]
        if len(order) > 1:
            # full ordering at the headline eta; at tighter eta the aligned DCT
            # tail can overtake the polynomial basis, so only the KLT is ranked
            ms = [m_of(sc, k, eta0) for k in order]
            checks.append(Check(f"{sc.label}: eta={eta0} m_eta ordered {' <= '.join(order)}",
                                all(x <= y for x, y in zip(ms, ms[1:])), str(ms)))
            if order[0] == "klt":
                for eta in cfg.etas[1:]:
                    ms = [m_of(sc, k, eta) for k in order]
                    checks.append(Check(f"{sc.label}: eta={eta} KLT needs the fewest columns",
                                        ms[0] == min(ms), str(ms)))
    single = sorted((s for s in cfg.scenarios if s.clusters and len(s.clusters) == 1),
                    key=lambda s: s.clusters[0][1])
    for lo, hi in zip(single, single[1:]):
        for kind in cfg.bases:
            a, b = m_of(lo, kind, eta0), m_of(hi, kind, eta0)
            checks.append(Check(f"{kind}: m_eta grows with angular spread", a < b,
                                f"{lo.label} {a} < {hi.label} {b}"))
    return checks


# ---------------------------------------------------------------- MSE decomposition

def run_mse_decomposition(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Theoretical NMSE, variance and bias against m, plus pilot-estimated spectra."""
    table = _new_table(cfg)
    pilot = make_pilot(cfg.pilot_length)[0]
    energy = pilot.pilot_energy
    for si, sc in enumerate(cfg.scenarios):
        st = _setup(cfg, sc)
        M = st.M
        for kind in cfg.bases:
            spec = channel_spectrum(_basis(kind, st), st.corr, st.phi, st.geom)
            for ai, a_db in enumerate(cfg.alpha_db):
                beta = beta_for_snr(db_to_lin(a_db), pilot)
                curve = mse_curve(spec, beta, energy)
                var = np.arange(M + 1) / (beta * energy)
                common = dict(scenario=sc.label, basis=kind, alpha_db=a_db)
                for m in range(M + 1):
                    table.add("nmse_theory", curve[m] / M, m=m, **common)
                    table.add("variance", var[m] / M, m=m, **common)
                    table.add("bias", (curve[m] - var[m]) / M, m=m, **common)
                table.add("m_star", optimal_order(spec, beta, energy)[0], **common)
                for J in cfg.num_blocks:
                    est = _estimated_corr(cfg, si, 0, st, pilot, beta, J)
                    b = _basis(kind, st, est.phi)
                    espec = channel_spectrum(b, est.phi, st.phi, st.geom)
                    for i, v in enumerate(espec.diag_b):
                        table.add("b_estimated", v, x=i + 1, note=f"J={J}", **common)
    return table


# ---------------------------------------------------------------- rank tables

def _imod_estimated(cfg, si, t, st, pilot, beta, J, kind, eta):
    est = _estimated_corr(cfg, si, t, st, pilot, beta, J)
    rank = est.meta["psi_rank"]
    basis = _basis(kind, st, est.phi)
    try:
        r = imod(basis, est, eta, st.geom, max_iters=cfg.imod_max_iters, grid_deg=cfg.grid_deg,
                 energy_reference="trace")
    except InfeasibleSupportError:
        return None, rank
    # a KLT support that uses up every sample direction says nothing about the channel
    if kind == "klt" and rank < st.M and r.m_eta_hat >= rank:
        return None, rank
    return r, rank


def run_rank_tables(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Optimal and dominant orders with exact and pilot-estimated correlations."""
    table = _new_table(cfg)
    pilot = make_pilot(cfg.pilot_length)[0]
    energy = pilot.pilot_energy
    if len(cfg.etas) != len(cfg.alpha_db):
        raise DomainError("rank tables pair each alpha with one eta")
    for si, sc in enumerate(cfg.scenarios):
        st = _setup(cfg, sc)
        for kind in cfg.bases:
            basis = _basis(kind, st)
            spec = channel_spectrum(basis, st.corr, st.phi, st.geom)
            for i, (a_db, eta) in enumerate(zip(cfg.alpha_db, cfg.etas)):
                beta = beta_for_snr(db_to_lin(a_db), pilot)
                common = dict(scenario=sc.label, basis=kind)
                table.add("m_star", optimal_order(spec, beta, energy)[0], alpha_db=a_db, **common)
                sup = dominant_support(spec, eta)
                table.add("m_eta", sup.m, eta=eta, note=_fmt_windows(sup.windows), **common)
                r = imod(basis, st.corr, eta, st.geom, max_iters=cfg.imod_max_iters,
                         grid_deg=cfg.grid_deg)
                table.add("m_eta_hat_exact", r.m_eta_hat, eta=eta, **common)
                table.add("phi_hat_exact_deg", math.degrees(r.phi_hat), eta=eta, **common)
                table.add("imod_iterations", r.iterations, eta=eta, **common)
                table.add("imod_converged", int(r.converged), eta=eta, **common)
                if not cfg.etas_estimated:
                    continue
                eta_e = cfg.etas_estimated[i]
                for J in cfg.num_blocks:
                    out = parallel_trials(
                        lambda t: _imod_estimated(cfg, si, t, st, pilot, beta, J, kind, eta_e),
                        cfg.trials, threads)
                    ok = [o[0] for o in out if o[0] is not None]
                    fails = len(out) - len(ok)
                    note = f"J={J}"
                    if 2 * fails > len(out):
                        value, se = float("nan"), float("nan")
                        note += f" {FAILURE_MARKER} ({fails}/{len(out)} trials)"
                    else:
                        value = float(np.mean([o.m_eta_hat for o in ok]))
                        se = float(np.std([o.m_eta_hat for o in ok], ddof=1) / math.sqrt(len(ok))) \
                            if len(ok) > 1 else float("nan")
                        if fails:
                            note += f" failures={fails}/{len(out)}"
                    row = dict(eta=eta_e, alpha_db=a_db, **common)
                    table.add("m_eta_hat_est", value, stderr=se, note=note, **row)
                    table.add("psi_rank_max", max(o[1] for o in out), note=f"J={J}", **row)
                    if ok:
                        table.add("phi_hat_est_deg",
                                  float(np.mean([math.degrees(o.phi_hat) for o in ok])),
                                  note=f"J={J}", **row)
    return table


def check_rank_tables(table: ResultTable, cfg: ExperimentConfig) -> list[Check]:
    checks = []
    its = [r["value"] for r in table.select(metric="imod_iterations")]
    conv = [r["value"] for r in table.select(metric="imod_converged")]
    checks.append(Check("IMOD converges within 5 iterations", all(conv) and max(its) <= 5,
                        f"iterations {its}"))
    diffs = []
    for r in table.select(metric="m_eta_hat_exact"):
        m = table.value(metric="m_eta", scenario=r["scenario"], basis=r["basis"], eta=r["eta"])
        diffs.append(abs(r["value"] - m))
    checks.append(Check("IMOD order within 1 of m_eta", max(diffs) <= 1, f"max diff {max(diffs)}"))
    return checks


# ---------------------------------------------------------------- beam patterns

def _pattern(geom: ArrayGeometry, h: np.ndarray, grid: np.ndarray) -> np.ndarray:
    return np.abs(steering_vector(geom, grid).conj().T @ h)


def _beamwidth_deg(power: np.ndarray, grid_deg: np.ndarray) -> float:
    """Width of the contiguous region around the peak within 3 dB of it."""
    k = int(np.argmax(power))
    above = power >= power[k] / 2
    lo = k
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = k
    while hi < power.size - 1 and above[hi + 1]:
        hi += 1
    return float(grid_deg[hi] - grid_deg[lo])


ESTIMATORS = ("true", "rr_exact", "mmse_exact", "rr_est", "mmse_est")


def run_beam_patterns(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Spatial patterns ``|a(theta)^H h|`` of the true channel and of its estimates."""
    table = _new_table(cfg)
    pilot = make_pilot(cfg.pilot_length)[0]
    grid_deg = np.linspace(-90.0, 90.0, int(round(180 / cfg.grid_deg)) + 1)
    grid = np.radians(grid_deg)
    a_db = cfg.alpha_db[0]
    eta = cfg.etas[0]
    J = cfg.num_blocks[0]
    beta = beta_for_snr(db_to_lin(a_db), pilot)
    kind = cfg.bases[0]
    for si, sc in enumerate(cfg.scenarios):
        st = _setup(cfg, sc)
        basis = _basis(kind, st)
        sup = dominant_support(channel_spectrum(basis, st.corr, st.phi, st.geom), eta)
        trunc = truncate(basis, sup.indices)

        def one(t):
            h, N = _draw_block(cfg, si, t, st, pilot)
            Y = np.sqrt(beta) * np.outer(h, pilot.pilot.conj()) + N
            mf = matched_filter(Y, pilot, beta)
            est = _estimated_corr(cfg, si, t, st, pilot, beta, J)
            hats = {"true": h,
                    "rr_exact": estimate_rr_lpm(mf, trunc, geom=st.geom, phi=st.phi).h_hat,
                    "mmse_exact": estimate_mmse(Y, pilot, st.corr, beta).h_hat,
                    "mmse_est": estimate_mmse(Y, pilot, project_psd(est.phi), beta).h_hat}
            try:
                r = imod(make_basis(kind, st.M), est, eta, st.geom, max_iters=cfg.imod_max_iters,
                         grid_deg=cfg.grid_deg, energy_reference="trace")
                hats["rr_est"] = estimate_rr_lpm(mf, truncate(basis, r.support.indices),
                                                 geom=st.geom, phi=r.phi_hat).h_hat
            except InfeasibleSupportError:
                hats["rr_est"] = mf.yp / mf.gamma
            return hats

        outs = parallel_trials(one, cfg.trials, threads)
        phi_deg = sc.mean_aoa_deg
        for name in ESTIMATORS:
            pats = np.stack([_pattern(st.geom, o[name], grid) for o in outs])
            peaks = grid_deg[np.argmax(pats, axis=1)]
            mean_power = np.mean(pats ** 2, axis=0)
            common = dict(scenario=sc.label, basis=kind, eta=eta, alpha_db=a_db)
            for x, v in zip(grid_deg, pats[0]):
                table.add(f"pattern_{name}", v, x=x, note="trial 0", **common)
            for x, v in zip(grid_deg, mean_power):
                table.add(f"mean_power_{name}", v, x=x, **common)
            table.add(f"peak_median_deg_{name}", float(np.median(peaks)),
                      note="median over trials", **common)
            table.add(f"peak_abs_err_deg_{name}", float(np.median(np.abs(peaks - phi_deg))),
                      note="median over trials", **common)
            table.add(f"beamwidth_3db_deg_{name}", _beamwidth_deg(mean_power, grid_deg), **common)
            if name != "true":
                err = [np.sum(np.abs(o[name] - o["true"]) ** 2) / st.M for o in outs]
                mean, se = batch_mean_se(err)
                table.add(f"nmse_{name}", mean, stderr=se, note=f"J={J}" if "est" in name else "",
                          **common)
    return table


def check_beam_patterns(table: ResultTable, cfg: ExperimentConfig) -> list[Check]:
    checks = []
    widths = []
    for sc in cfg.scenarios:
        spread = max(c[1] for c in sc.clusters)
        rows = table.select(metric="mean_power_true", scenario=sc.label)
        peak = max(rows, key=lambda r: r["value"])["x"]
        checks.append(Check(f"{sc.label}: true pattern peak within the spread",
                            abs(peak - sc.mean_aoa_deg) <= spread, f"peak at {peak} deg"))
        if spread <= 7.2:
            for name in ("rr_exact", "rr_est"):
                pk = table.value(metric=f"peak_median_deg_{name}", scenario=sc.label)
                checks.append(Check(f"{sc.label}: {name} median peak within 3 deg",
                                    abs(pk - sc.mean_aoa_deg) <= 3.0, f"median peak {pk:.2f} deg"))
        widths.append((spread, table.value(metric="beamwidth_3db_deg_true", scenario=sc.label)))
    widths.sort()
    for (s1, w1), (s2, w2) in zip(widths, widths[1:]):
        if s2 > s1:
            checks.append(Check("main lobe widens with angular spread", w2 > w1,
                                f"{w1:.1f} deg -> {w2:.1f} deg"))
    return checks


# ---------------------------------------------------------------- multi-cluster

def run_multicluster(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Two-cluster spectra in a fixed basis and RR estimation on the union support."""
    table = _new_table(cfg)
    pilot = make_pilot(cfg.pilot_length)[0]
    energy = pilot.pilot_energy
    eta = cfg.etas[0]
    kind = cfg.bases[0]
    for si, sc in enumerate(cfg.scenarios):
        st = _setup(cfg, sc, align=False)
        basis = make_basis(kind, st.M)
        spec = channel_spectrum(basis, st.corr)
        d = spec.diag_b
        common = dict(scenario=sc.label, basis=kind, eta=eta)
        for i, v in enumerate(d):
            table.add("b_unaligned", v, x=i + 1, scenario=sc.label, basis=kind)
        one = dominant_support(spec, eta, 1)
        two = dominant_support(spec, eta, 2)
        table.add("m_eta_1win", one.m, note=_fmt_windows(one.windows), **common)
        table.add("m_eta_2win", two.m, note=_fmt_windows(two.windows), **common)
        table.add("num_windows", len(two.windows), **common)
        gap = two.windows[1][0] - two.windows[0][1] if len(two.windows) == 2 else 0
        table.add("window_gap", gap, **common)
        e1, _ = best_window(d, two.m)
        table.add("captured_1win_at_m2", e1 / st.M, m=two.m, **common)
        table.add("captured_2win_at_m2", captured_fraction(d, two), m=two.m, **common)
        trunc = truncate(basis, two.indices)
        for a_db in cfg.alpha_db:
            beta = beta_for_snr(db_to_lin(a_db), pilot)
            gamma = math.sqrt(beta) * energy

            def trial(t):
                h, npn = _draw_trial(cfg, si, t, st, pilot)
                yp = gamma * h + npn
                qm = trunc.q_m
                rr = qm @ (qm.conj().T @ yp) / gamma
                return (np.sum(np.abs(rr - h) ** 2) / st.M,
                        np.sum(np.abs(yp / gamma - h) ** 2) / st.M)

            errs = np.array(parallel_trials(trial, cfg.trials, threads))
            for j, name in enumerate(("nmse_rr", "nmse_ls")):
                mean, se = batch_mean_se(errs[:, j])
                table.add(name, mean, stderr=se, alpha_db=a_db, m=two.m if j == 0 else st.M,
                          **common)
    return table


def check_multicluster(table: ResultTable, cfg: ExperimentConfig) -> list[Check]:
    checks = []
    for sc in cfg.scenarios:
        nwin = table.value(metric="num_windows", scenario=sc.label)
        gap = table.value(metric="window_gap", scenario=sc.label)
        c1 = table.value(metric="captured_1win_at_m2", scenario=sc.label)
        c2 = table.value(metric="captured_2win_at_m2", scenario=sc.label)
        if sc.label == "separable":
            checks.append(Check("separable: two windows capture more than one at equal m",
                                nwin == 2 and c2 > c1, f"{c2:.4f} vs {c1:.4f}"))
        if sc.label == "overlapped":
            checks.append(Check("overlapped: windows adjacent or merged", gap <= 2, f"gap {gap}"))
        for a_db in cfg.alpha_db:
            rr = table.value(metric="nmse_rr", scenario=sc.label, alpha_db=a_db)
            ls = table.value(metric="nmse_ls", scenario=sc.label, alpha_db=a_db)
            checks.append(Check(f"{sc.label}: RR beats LS at {a_db} dB", rr < ls,
                                f"{rr:.4g} vs {ls:.4g}"))
    return checks


RUNNERS = {
    "mse_sweep": (run_mse_sweep, check_mse_sweep),
    "spectrum_report": (run_spectrum_report, check_spectrum_report),
    "mse_decomposition": (run_mse_decomposition, None),
    "rank_tables": (run_rank_tables, check_rank_tables),
    "beam_patterns": (run_beam_patterns, check_beam_patterns),
    "multicluster": (run_multicluster, check_multicluster),
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1, check: bool = False) -> RunResult:
    run, chk = RUNNERS[cfg.experiment]
    table = run(cfg, threads=threads)
    checks = chk(table, cfg) if (check and chk is not None) else []
    return RunResult(table, checks)
