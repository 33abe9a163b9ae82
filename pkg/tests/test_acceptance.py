"""End-to-end gate: every shipped guarantee at its stated tolerance.

Each test covers one release criterion and prints a single PASS/FAIL line
with the measured numbers (visible with ``pytest tests/test_acceptance.py -s``;
always shown for failures).  Experiments run once at seed 42 and are shared
between criteria that read different checks of the same suite.
"""
import contextlib
import io
import time

from cyclic_inference import cli, experiments

SEED = 42

_cache = {}
_timings = {}


def run(name):
    if name not in _cache:
        t0 = time.perf_counter()
        _cache[name] = experiments.run_experiment(name, SEED)
        _timings[name] = time.perf_counter() - t0
    return _cache[name]


def checks_of(result):
    return {c.name: c for c in result.checks}


def emit(num, title, parts):
    """Print one criterion line; parts are (label, ok, detail) triples."""
    ok = all(p[1] for p in parts)
    detail = "  ".join(f"{label}={text}" for label, _, text in parts)
    print(f"{'PASS' if ok else 'FAIL'} criterion {num:02d} [{title}] {detail}",
          flush=True)
    return ok


def bounded(check, low=None, high=None):
    """check passed AND its effective bounds are the advertised ones."""
    return (check.passed
            and (low is None or check.bound_low == low)
            and (high is None or check.bound_high == high))


def test_criterion_01_pair_evolution_matches_exact_propagator():
    res = run("vn-equiv")
    c = checks_of(res)
    dims = {int(r[1]) for r in res.tables["trials"][1]}
    parts = [
        ("rk4", bounded(c["rk4_deviation"], high=1e-6),
         f"{c['rk4_deviation'].value:.2e}<=1e-06"),
        ("euler", bounded(c["euler_deviation"], high=5e-3),
         f"{c['euler_deviation'].value:.2e}<=5e-03"),
        ("generators", res.summary["instances"] == 50
         and dims == set(range(2, 9)), f"{res.summary['instances']} dims 2-8"),
        ("runtime", _timings["vn-equiv"] <= 30.0,
         f"{_timings['vn-equiv']:.1f}s<=30s"),
    ]
    assert emit(1, "pair evolution vs exact propagator", parts)


def test_criterion_02_integrator_convergence_orders():
    c = checks_of(run("vn-equiv"))
    parts = [
        ("rk4_factor", bounded(c["rk4_halving_factor"], 12.0, 20.0),
         f"{c['rk4_halving_factor'].value:.2f} in [12,20]"),
        ("euler_factor", bounded(c["euler_halving_factor"], 1.8, 2.2),
         f"{c['euler_halving_factor'].value:.3f} in [1.8,2.2]"),
    ]
    assert emit(2, "dt-halving factors", parts)


def test_criterion_03_kernel_normalization_defect_slope():
    res = run("kernel-converge")
    c = checks_of(res)
    eps = [r[0] for r in res.tables["defect"][1]]
    scaled = sorted(e * res.summary["v0"] for e in eps)
    parts = [
        ("slope_rel", bounded(c["defect_slope_rel"], high=0.02),
         f"{c['defect_slope_rel'].value:.2e}<=2e-02"),
        ("eps_grid", scaled == [0.005, 0.01, 0.02, 0.04],
         "epsV/hbar {0.04,0.02,0.01,0.005}"),
    ]
    assert emit(3, "row-sum defect slope = V/hbar", parts)


def test_criterion_04_kernel_residual_orders():
    plain = checks_of(run("kernel-converge"))["residual_order"]
    em = checks_of(run("em-kernel"))["residual_order"]
    parts = [
        ("plain", bounded(plain, 0.9, 1.2), f"{plain.value:.3f} in [0.9,1.2]"),
        ("em", bounded(em, 0.9, 1.2), f"{em.value:.3f} in [0.9,1.2]"),
    ]
    assert emit(4, "generator-limit residual orders", parts)


def test_criterion_05_em_kernel_identities():
    c = checks_of(run("em-kernel"))
    parts = [
        ("hermiticity", bounded(c["hermiticity"], high=1e-14),
         f"{c['hermiticity'].value:.2e}<=1e-14"),
        ("reduction", bounded(c["gauge_free_reduction"], high=1e-12),
         f"{c['gauge_free_reduction'].value:.2e}<=1e-12"),
        ("cos_sin", bounded(c["cos_sin_identity_ratio"], high=1.0),
         f"max gap/|z|^3 = {c['cos_sin_identity_ratio'].value:.3f}<=1"),
    ]
    assert emit(5, "electromagnetic kernel identities", parts)


def test_criterion_06_chain_inference_identities():
    res = run("bp-chain")
    c = checks_of(res)
    labels = ("singles", "pairwise", "mu_product", "theta_k",
              "transitions", "joint_rebuild")
    parts = [(label, bounded(c[f"{label}_deviation"], high=1e-12),
              f"{c[f'{label}_deviation'].value:.1e}") for label in labels]
    parts.append(("phi", bounded(c["phase_free_phi"], high=1e-12),
                  f"{c['phase_free_phi'].value:.1e}"))
    parts.append(("chains", res.summary["instances"] == 200, "200"))
    assert emit(6, "chain marginals/messages vs enumeration <=1e-12", parts)


def test_criterion_07_cycle_suite():
    born = run("cycle-born")
    update = run("cycle-update")
    clamp = run("clamp")
    bern = run("bernstein")
    cb = checks_of(born)["born_diagonal"]
    cu = checks_of(update)
    cc = checks_of(clamp)["clamped_conditionals"]
    cr = checks_of(bern)["bernstein_rebuild"]
    counts = (born.summary["instances"], update.summary["instances"],
              clamp.summary["instances"], bern.summary["instances"])
    parts = [
        ("born_diag", bounded(cb, high=1e-12), f"{cb.value:.1e}<=1e-12"),
        ("update/cond", bounded(cu["update_vs_product_scaled"], high=1e-10),
         f"{cu['update_vs_product_scaled'].value:.1e}<=1e-10"),
        ("clamped", bounded(cc, high=1e-12), f"{cc.value:.1e}<=1e-12"),
        ("bernstein", bounded(cr, high=1e-12), f"{cr.value:.1e}<=1e-12"),
        ("continuum_order", bounded(cu["continuum_order"], 0.9, 1.1),
         f"{cu['continuum_order'].value:.3f} in [0.9,1.1]"),
        ("cycles", counts == (100, 100, 100, 100), "100 each"),
    ]
    assert emit(7, "cyclic products vs enumeration", parts)


def test_criterion_08_energy_scale_estimates():
    res = run("energetics")
    c = checks_of(res)
    parts = [
        ("E_photon", bounded(c["photon_energy"], 3.85e-19, 3.95e-19),
         f"{c['photon_energy'].value:.4e} J"),
        ("hsp_mean", bounded(c["hsp_mean"], 3.9e-17 - 1e-18, 3.9e-17 + 1e-18),
         f"{c['hsp_mean'].value:.3e} J"),
        ("gap", bounded(c["gap_vs_quoted_rel"], high=0.05),
         f"{res.summary['gap']:.3e} J vs 1.6e-18 rel {c['gap_vs_quoted_rel'].value:.3f}"),
        ("ratio", bounded(c["photon_ratio"], 3.8, 4.2),
         f"{c['photon_ratio'].value:.3f} in [3.8,4.2]"),
    ]
    assert emit(8, "photon/visibility energy estimates", parts)


def test_criterion_09_two_sided_markov_symmetrization():
    c = checks_of(run("markov-sym"))
    parts = [
        ("drift", bounded(c["drift_recovery_rel"], high=1e-3),
         f"{c['drift_recovery_rel'].value:.2e}<=1e-03"),
        ("diffusion", bounded(c["diffusion_recovery_rel"], high=1e-3),
         f"{c['diffusion_recovery_rel'].value:.2e}<=1e-03"),
        ("p_minus=p_plus", c["future_past_symmetry"].passed
         and c["future_past_symmetry"].value == 0.0, "exact"),
        ("drift_order", bounded(c["marginal_drift_order"], low=0.9),
         f"{c['marginal_drift_order'].value:.3f}>=0.9"),
        ("half_diff_order", bounded(c["half_difference_order"], low=0.9),
         f"{c['half_difference_order'].value:.3f}>=0.9"),
    ]
    assert emit(9, "forward/backward Markov symmetrization", parts)


def test_criterion_10_reports_are_deterministic(tmp_path):
    t0 = time.perf_counter()
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    sink = io.StringIO()
    with contextlib.redirect_stdout(sink):
        code_a = cli.main(["all", "--seed", "42", "--out", str(out_a)])
        code_b = cli.main(["all", "--seed", "42", "--out", str(out_b)])
    elapsed = time.perf_counter() - t0
    files_a = {p.name: p.read_bytes() for p in sorted(out_a.iterdir())}
    files_b = {p.name: p.read_bytes() for p in sorted(out_b.iterdir())}
    parts = [
        ("exit", code_a == 0 and code_b == 0, f"{code_a},{code_b}"),
        ("identical", files_a == files_b,
         f"{len(files_a)} files byte-identical" if files_a == files_b
         else "MISMATCH"),
        ("runtime", elapsed <= 300.0, f"{elapsed:.1f}s<=300s"),
    ]
    assert emit(10, "cli all --seed 42 reruns byte-identical", parts)
