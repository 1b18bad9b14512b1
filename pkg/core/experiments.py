"""
실험 드라이버 - 완화 스윕, 약-강 섭동 스터디, 검사 스위트, 단일 실행, 재피팅
"""

import asyncio
import logging
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy
import sklearn
from dataclasses_json import dataclass_json

from config import BumpSpec, InitialProfile, Params, Perturbation, StudyConfig, StudyMode
from core.constitutive import capillary_mu, check_nonmonotone, find_nonmonotone_threshold, identity_residuals
from core.darcy_limit import (
    StrongLift, continuity_residual, error_term, gf_rhs, gradient_flow_energy, lift_strong, solve_gradient_flow,
)
from core.entropy_diag import (
    CheckReport, check_dissipation, check_ledger_rate, check_bump_identity, check_pointwise_inequalities,
)
from core.nsk_dynamics import (
    State, bohm_residual, drift_constraint_residual, simulate, stable_dt, step, well_prepared_state,
)
from core.rate_fit import RateFit, rate_fit
from core.torus_grid import Grid
from services.output_writer import write_frame, write_json
from services.trajectory_store import read_sweep, write_gradient_flow, write_trajectory
from utils.errors import NSKError
from utils.progress_tracker import ProgressTracker, StudyStage
from utils.run_executor import ParallelRunExecutor, RunOutcome

logger = logging.getLogger(__name__)

IDENTITY_TOLERANCE = 1e-10
MASS_TOLERANCE = 1e-12
BOHM_MIN_RATIO = 1e2
BOHM_PLATEAU = 1e-11
ERROR_TERM_SPREAD = 1.1
ERROR_TERM_EPSILONS = (0.2, 0.1, 0.05)
FRICTION_RATIOS = (1.0, 1e3, 1e6)
LEDGER_SAMPLE_FRACTION = 1.0 / 40.0   # 장부 창 샘플 간격 / ε²
LEDGER_WINDOW_SAMPLES = 40

SWEEP_COLUMNS = [
    "epsilon", "nu", "psi_sup", "psi_final", "mass_drift", "n_steps", "dt_max",
    "dissipation_passed", "ledger_residual", "ledger_passed", "bump_identity_residual", "status",
]


# ---------------------------------------------------------------------------
# 보고서 타입
# ---------------------------------------------------------------------------

@dataclass_json
@dataclass
class RelaxationPoint:
    """스윕 한 점 (ε 하나)의 결과"""
    epsilon: float
    nu: float
    psi_sup: float = math.nan
    psi_final: float = math.nan
    mass_drift: float = math.nan
    n_steps: int = 0
    dt_max: float = 0.0
    dissipation_passed: bool = False
    ledger_residual: float = math.nan
    ledger_passed: bool = False
    bump_identity_residual: float = math.nan   # 범프가 꺼져 있으면 NaN
    times: List[float] = field(default_factory=list)
    psi: List[float] = field(default_factory=list)
    status: str = "ok"
    failure_time: Optional[float] = None
    message: str = ""


@dataclass_json
@dataclass
class FitAssessment:
    """fit: sup_t Ψ_γ 의 log-log 기울기. bound: Ψ_γ(T)/(ε⁴ + νε) 비율"""
    fit: RateFit
    bound: RateFit
    slope_threshold: float
    ratio_spread_threshold: float
    slope_ok: bool
    bound_ok: bool
    monotone: bool
    passed: bool

    def to_payload(self) -> Dict[str, Any]:
        """rate_fit.json 형식 (피팅 필드를 최상위에 펼침)"""
        payload = self.fit.to_dict(encode_json=True)
        payload.update({
            "psi_final": self.bound.ys,
            "model": self.bound.model,
            "ratios": self.bound.ratios,
            "ratio_spread": self.bound.ratio_spread,
            "ratio_growth": self.bound.ratio_growth,
            "slope_threshold": self.slope_threshold,
            "ratio_spread_threshold": self.ratio_spread_threshold,
            "slope_ok": self.slope_ok,
            "bound_ok": self.bound_ok,
            "monotone": self.monotone,
            "passed": self.passed,
        })
        return payload


@dataclass_json
@dataclass
class RelaxationReport:
    points: List[RelaxationPoint] = field(default_factory=list)
    assessment: Optional[FitAssessment] = None
    failure: Optional[Dict[str, Any]] = None
    passed: bool = False


@dataclass_json
@dataclass
class WeakStrongCase:
    """약-강 케이스 (γ, s) 하나의 결과"""
    gamma: float
    s: float
    nu: float
    psi_zero_max: float = math.nan
    psi_zero_bound: float = math.nan
    zero_ok: bool = False
    c_hat_delta: float = math.nan
    c_hat_half: float = math.nan
    c_hat_ok: bool = False
    bound_ok: bool = False
    ledger_residual: float = math.nan
    passed: bool = False
    status: str = "ok"
    failure_time: Optional[float] = None
    message: str = ""


@dataclass_json
@dataclass
class WeakStrongReport:
    cases: List[WeakStrongCase] = field(default_factory=list)
    failure: Optional[Dict[str, Any]] = None
    passed: bool = False


@dataclass_json
@dataclass
class ChecksReport:
    reports: List[CheckReport] = field(default_factory=list)
    passed: bool = False


@dataclass_json
@dataclass
class SingleRunReport:
    kind: str
    reports: List[CheckReport] = field(default_factory=list)
    failure: Optional[Dict[str, Any]] = None
    passed: bool = False


# ---------------------------------------------------------------------------
# 공통 도우미
# ---------------------------------------------------------------------------

def library_versions() -> Dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
        "scikit-learn": sklearn.__version__,
    }


def initial_density(grid: Grid, profile: InitialProfile) -> np.ndarray:
    """ρ₀(x) = mean + amplitude·sin(2π·mode·x/L)"""
    phase = 2 * np.pi * profile.mode * grid.nodes / grid.length
    return profile.mean + profile.amplitude * np.sin(phase)


def smooth_state(rho: np.ndarray, grid: Grid, params: Params, time: float = 0.0,
                 m: Optional[np.ndarray] = None) -> State:
    """J = ∂ₓμ(ρ) 제약을 만족하는 상태 (기본 m = 0)"""
    rho = np.asarray(rho, dtype=float)
    momentum = np.zeros_like(rho) if m is None else np.asarray(m, dtype=float)
    J = grid.deriv(np.asarray(capillary_mu(rho, params)))
    return State(time=time, rho=rho, m=momentum, J=J, grid=grid).validate(params)


def apply_bump_threshold(params: Params, factor: Optional[float]) -> Params:
    """factor가 있으면 범프 진폭을 factor·A*로 설정"""
    if factor is None:
        return params
    threshold = find_nonmonotone_threshold(params)
    bump = params.bump
    logger.info(f"🎚️ 범프 진폭 = {factor:g}·A* = {factor * threshold:.6g} (γ={params.gamma:g})")
    return params.with_updates(bump=BumpSpec(factor * threshold, bump.center, bump.halfwidth))


def study_params(cfg: StudyConfig) -> Params:
    return apply_bump_threshold(cfg.resolved_params(), cfg.bump_threshold_factor)


def study_grid(cfg: StudyConfig) -> Grid:
    return Grid(cfg.grid.n_points, cfg.grid.length)


def _study_manifest(cfg: StudyConfig, study: str, status: str, **extra) -> Dict[str, Any]:
    return {
        "study": study,
        "status": status,
        "config": cfg.to_dict(encode_json=True),
        "versions": library_versions(),
        **extra,
    }


def _failure_info(error: BaseException, **extra) -> Dict[str, Any]:
    return {"time": getattr(error, "time", None), "error": type(error).__name__, "message": str(error), **extra}


def _run_pool(executor: ParallelRunExecutor, func: Callable[[Any], Any], jobs: List[Any],
              labels: List[str], tracker: ProgressTracker) -> List[RunOutcome]:
    async def on_progress(done: int, total: int, outcome: RunOutcome):
        status = "완료" if outcome.ok else "실패"
        tracker.update_sub_progress(done / total, f"{outcome.label} {status}")

    return asyncio.run(executor.execute(func, jobs, labels, progress_callback=on_progress))


# ---------------------------------------------------------------------------
# 완화 스윕
# ---------------------------------------------------------------------------

@dataclass
class GradientFlowSettings:
    """ρ̄ 적분 설정 (워커에 그대로 전달)"""
    scheme: str = "etd2"
    max_dt: float = 1e-3
    tail_tolerance: float = 1e-10

    @classmethod
    def from_config(cls, cfg: StudyConfig) -> 'GradientFlowSettings':
        return cls(cfg.gf_scheme, cfg.gf_max_dt, cfg.gf_tail_tolerance)

    def solve(self, rho0: np.ndarray, t_end: float, grid: Grid, params: Params, sample_every: float,
              cfl: float) -> List[Tuple[float, np.ndarray]]:
        return solve_gradient_flow(rho0, t_end, grid, params, sample_every=sample_every, cfl=cfl,
                                   scheme=self.scheme, max_dt=self.max_dt, tail_tolerance=self.tail_tolerance)


def ledger_window_report(rho0: np.ndarray, grid: Grid, params: Params, t_end: float, cfl: float,
                         gf: Optional[GradientFlowSettings] = None) -> CheckReport:
    """[0, ε²] 창을 ε²/40 간격으로 다시 적분해 장부 합계와 dΨ/dt 비교"""
    gf = gf or GradientFlowSettings()
    window = min(t_end, LEDGER_WINDOW_SAMPLES * LEDGER_SAMPLE_FRACTION * params.epsilon**2)
    spacing = window / LEDGER_WINDOW_SAMPLES
    samples = gf.solve(rho0, window, grid, params, spacing, cfl)
    lifts = lift_strong(samples, grid, params)
    trajectory = simulate(well_prepared_state(lifts[0], params), window, params, spacing,
                          cfl=0.5 * cfl, reference=lifts)
    report = check_ledger_rate(trajectory, lifts, params)
    report.details.update({"sample_spacing": spacing, "window": window})
    return report


@dataclass
class RelaxationJob:
    """워커에 넘기는 스윕 한 점 (피클 가능)"""
    epsilon: float
    params: Params
    grid: Grid
    rho0: np.ndarray
    lifts: List[StrongLift]
    t_end: float
    sample_every: float
    cfl: float
    run_dir: str
    gf: GradientFlowSettings = field(default_factory=GradientFlowSettings)
    write_snapshots: bool = False


def _relaxation_point(job: RelaxationJob) -> RelaxationPoint:
    """잘 준비된 초기값 → 시뮬레이션 → 진단 요약 → 장부 창 검사"""
    params = job.params
    point = RelaxationPoint(epsilon=job.epsilon, nu=params.nu)
    lifts = job.lifts
    try:
        init = well_prepared_state(lifts[0], params)
        trajectory = simulate(init, job.t_end, params, job.sample_every, cfl=job.cfl, reference=lifts)
        ledger = ledger_window_report(job.rho0, job.grid, params, job.t_end, job.cfl, job.gf)
    except NSKError as e:
        point.status = "failed"
        point.failure_time = getattr(e, "time", None)
        point.message = str(e)
        logger.error(f"❌ ε={job.epsilon:g} 실행 실패: {e}")
        return point

    write_trajectory(trajectory, Path(job.run_dir), job.write_snapshots,
                     extra={"epsilon": job.epsilon, "versions": library_versions()})
    records = trajectory.diagnostics
    psi = [r.psi_gamma for r in records]
    mass0 = records[0].mass
    point.psi_sup = float(max(psi))
    point.psi_final = float(psi[-1])
    point.mass_drift = max(abs(r.mass - mass0) for r in records) / abs(mass0)
    point.n_steps = trajectory.n_steps
    point.dt_max = trajectory.dt_max
    point.dissipation_passed = check_dissipation(trajectory).passed
    point.ledger_residual = ledger.max_residual
    point.ledger_passed = ledger.passed
    if params.bump.amplitude != 0.0:
        point.bump_identity_residual = check_bump_identity(trajectory, lifts, params).constants["relative_residual"]
    point.times = trajectory.times
    point.psi = psi
    return point


def _sweep_model(epsilons: Sequence[float], nus: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    """점마다 ν가 다를 수 있는 ε⁴ + νε"""
    table = {float(e): float(n) for e, n in zip(epsilons, nus)}
    return lambda eps: np.array([e**4 + table[float(e)] * e for e in np.asarray(eps, dtype=float)])


def assess_fit(epsilons: Sequence[float], psi_sup: Sequence[float], nus: Sequence[float],
               slope_threshold: float, ratio_spread_threshold: float,
               psi_final: Optional[Sequence[float]] = None) -> FitAssessment:
    """ν = 0 이면 sup_t Ψ_γ 기울기, ν > 0 이면 Ψ_γ(T)/(ε⁴ + νε) 상한의 균일성으로 판정

    상한 판정은 한쪽 방향: ε가 줄 때 비율이 가장 큰 ε의 값보다 ratio_spread_threshold배 이상 커지면 실패.
    단조성은 Ψ_γ(T)로 항상 확인. psi_final이 없으면 psi_sup 사용.
    """
    order = np.argsort(-np.asarray(epsilons, dtype=float))
    xs = np.asarray(epsilons, dtype=float)[order]
    sup = np.asarray(psi_sup, dtype=float)[order]
    final = sup if psi_final is None else np.asarray(psi_final, dtype=float)[order]
    ns = np.asarray(nus, dtype=float)[order]

    model = _sweep_model(xs, ns)
    fit = rate_fit(xs, sup)
    bound = rate_fit(xs, final, model=model, model_name="eps^4 + nu*eps")
    viscous = bool(np.any(ns > 0))
    slope_ok = viscous or fit.slope >= slope_threshold
    bound_ok = not viscous or bound.ratio_growth < ratio_spread_threshold
    monotone = bool(np.all(np.diff(final) < 0))
    return FitAssessment(
        fit=fit, bound=bound, slope_threshold=slope_threshold, ratio_spread_threshold=ratio_spread_threshold,
        slope_ok=slope_ok, bound_ok=bound_ok, monotone=monotone,
        passed=slope_ok and bound_ok and monotone,
    )


def _write_sweep(points: Sequence[RelaxationPoint], out: Path):
    rows = [{column: getattr(p, column) for column in SWEEP_COLUMNS} for p in points]
    write_frame(out / "sweep.csv", pd.DataFrame(rows, columns=SWEEP_COLUMNS))


def _write_plot_data(points: Sequence[RelaxationPoint], out: Path):
    rows = [
        {"epsilon": p.epsilon, "t": t, "psi_gamma": value}
        for p in points if p.status == "ok"
        for t, value in zip(p.times, p.psi)
    ]
    write_frame(out / "plot_data.csv", pd.DataFrame(rows, columns=["epsilon", "t", "psi_gamma"]))


def run_relaxation_study(cfg: StudyConfig, executor: Optional[ParallelRunExecutor] = None) -> RelaxationReport:
    """ε 스윕: 그래디언트 플로우 1회 → ε마다 리프트 → 완화 실행 → log-log 피팅"""
    out = Path(cfg.output_dir)
    executor = executor or ParallelRunExecutor(cfg.workers)
    tracker = ProgressTracker("완화 스터디", [
        StudyStage.GRADIENT_FLOW, StudyStage.STRONG_LIFT, StudyStage.RELAXATION_RUNS, StudyStage.RATE_FIT,
        StudyStage.WRITE_OUTPUTS,
    ])
    base = study_params(cfg).ensure_valid(StudyMode.RELAXATION)
    grid = study_grid(cfg)
    gf = GradientFlowSettings.from_config(cfg)
    rho0 = initial_density(grid, cfg.profile)
    runs = [{"epsilon": eps, "run_dir": f"runs/eps_{eps:g}"} for eps in cfg.epsilon_list]
    write_json(out / "manifest.json", _study_manifest(cfg, "relaxation", "running", runs=runs))

    def fail(error: NSKError, stage: str) -> RelaxationReport:
        tracker.error(str(error))
        failure = _failure_info(error, stage=stage)
        write_json(out / "manifest.json", _study_manifest(cfg, "relaxation", "failed", runs=runs, failure=failure))
        return RelaxationReport(failure=failure)

    # 1. ρ̄는 ε와 무관하므로 한 번만 적분
    tracker.update_stage(StudyStage.GRADIENT_FLOW)
    try:
        samples = gf.solve(rho0, cfg.t_end, grid, base, cfg.sample_every, cfg.cfl)
    except NSKError as e:
        return fail(e, "gradient_flow")
    write_gradient_flow(samples, grid, base, out / "gradient_flow", cfg.write_snapshots)

    # 2. m̄ = εF(ρ̄) 이므로 리프트는 ε마다
    tracker.update_stage(StudyStage.STRONG_LIFT)
    point_params = [base.with_updates(epsilon=eps, nu=cfg.nu_policy.resolve(eps)) for eps in cfg.epsilon_list]
    lifts = []
    try:
        for index, params in enumerate(point_params, start=1):
            lifts.append(lift_strong(samples, grid, params))
            tracker.update_sub_progress(index / len(point_params), f"ε={params.epsilon:g}")
    except NSKError as e:
        return fail(e, "strong_lift")

    # 3. ε마다 완화 실행
    tracker.update_stage(StudyStage.RELAXATION_RUNS)
    jobs = [
        RelaxationJob(
            epsilon=eps, params=params, grid=grid, rho0=rho0, lifts=point_lifts, t_end=cfg.t_end,
            sample_every=cfg.sample_every, cfl=cfg.cfl, run_dir=str(out / run["run_dir"]), gf=gf,
            write_snapshots=cfg.write_snapshots,
        )
        for eps, params, point_lifts, run in zip(cfg.epsilon_list, point_params, lifts, runs)
    ]
    outcomes = _run_pool(executor, _relaxation_point, jobs, [f"ε={eps:g}" for eps in cfg.epsilon_list], tracker)

    points = []
    for job, outcome in zip(jobs, outcomes):
        if outcome.ok:
            points.append(outcome.result)
        else:
            points.append(RelaxationPoint(
                epsilon=job.epsilon, nu=job.params.nu, status="failed",
                failure_time=getattr(outcome.error, "time", None), message=str(outcome.error),
            ))
    for run, point in zip(runs, points):
        run["status"] = point.status

    report = RelaxationReport(points=points)
    failed = [p for p in points if p.status != "ok"]
    if failed:
        first = failed[0]
        report.failure = {"stage": "relaxation_run", "epsilon": first.epsilon,
                          "time": first.failure_time, "message": first.message}
        tracker.error(f"ε={first.epsilon:g}에서 중단: {first.message}")
    else:
        tracker.update_stage(StudyStage.RATE_FIT)
        try:
            report.assessment = assess_fit(
                [p.epsilon for p in points], [p.psi_sup for p in points], [p.nu for p in points],
                cfg.slope_threshold, cfg.ratio_spread_threshold, psi_final=[p.psi_final for p in points],
            )
            ledger_ok = all(p.ledger_passed for p in points)
            if not ledger_ok:
                logger.warning("⚠️ 장부 창 검사 실패: " + ", ".join(
                    f"ε={p.epsilon:g} ({p.ledger_residual:.2e})" for p in points if not p.ledger_passed))
            report.passed = report.assessment.passed and ledger_ok
        except ValueError as e:
            report.failure = {"stage": "rate_fit", "message": str(e)}
            tracker.error(str(e))

    # 4. 저장 (완료된 실행의 결과는 실패와 무관하게 남긴다)
    tracker.update_stage(StudyStage.WRITE_OUTPUTS)
    _write_sweep(points, out)
    if cfg.emit_plot_data:
        _write_plot_data(points, out)
    if report.assessment is not None:
        write_json(out / "rate_fit.json", report.assessment.to_payload())
    status = "failed" if report.failure else "completed"
    write_json(out / "manifest.json", _study_manifest(
        cfg, "relaxation", status, runs=runs, failure=report.failure, passed=report.passed,
    ))
    if not report.failure:
        assessment = report.assessment
        tracker.complete({"slope": f"{assessment.fit.slope:.3f}",
                          "ratio_growth": f"{assessment.bound.ratio_growth:.3g}", "passed": report.passed})
    return report


def refit_sweep(input_dir: Path, slope_threshold: float = 3.5, ratio_spread_threshold: float = 3.0) -> FitAssessment:
    """저장된 sweep.csv 재피팅 후 rate_fit.json 갱신 (psi_sup 열이 없으면 psi_final로 기울기)"""
    frame = read_sweep(input_dir)
    if "status" in frame.columns:
        frame = frame[frame["status"] == "ok"]
    nus = frame["nu"] if "nu" in frame.columns else np.zeros(len(frame))
    sup = frame["psi_sup"] if "psi_sup" in frame.columns else frame["psi_final"]
    assessment = assess_fit(frame["epsilon"].to_numpy(), sup.to_numpy(), np.asarray(nus),
                            slope_threshold, ratio_spread_threshold, psi_final=frame["psi_final"].to_numpy())
    write_json(Path(input_dir) / "rate_fit.json", assessment.to_payload())
    return assessment


# ---------------------------------------------------------------------------
# 약-강 유일성 스터디
# ---------------------------------------------------------------------------

@dataclass
class WeakStrongJob:
    params: Params
    grid: Grid
    profile: InitialProfile
    perturbation: Perturbation
    t_end: float
    sample_every: float
    cfl: float
    tolerance_psi_zero: float
    run_dir: str
    write_snapshots: bool = False


def gronwall_rate(times: Sequence[float], psi: Sequence[float]) -> float:
    """Ĉ = max_{t>t₀} log(Ψ(t)/Ψ(t₀))/(t − t₀)"""
    t = np.asarray(times, dtype=float)
    y = np.asarray(psi, dtype=float)
    if t.size < 2:
        raise ValueError("샘플 2개 이상 필요")
    if not y[0] > 0:
        raise ValueError(f"Ψ(t₀) > 0 필요 (Ψ(t₀)={y[0]:.3e})")
    ratios = np.maximum(y[1:], np.finfo(float).tiny) / y[0]
    return float(np.max(np.log(ratios) / (t[1:] - t[0])))


def _weakstrong_case(job: WeakStrongJob) -> WeakStrongCase:
    params, grid = job.params, job.grid
    case = WeakStrongCase(gamma=params.gamma, s=params.s, nu=params.nu)
    run_dir = Path(job.run_dir)
    try:
        rho0 = initial_density(grid, job.profile)
        base = smooth_state(rho0, grid, params)
        reference = simulate(base, job.t_end, params, job.sample_every, cfl=job.cfl)
        lifts = [StrongLift.from_state(s, params) for s in reference.snapshots]
        write_trajectory(reference, run_dir / "reference", job.write_snapshots)

        # (a) 같은 초기값을 다른 dt로
        twin = simulate(base, job.t_end, params, job.sample_every, cfl=0.5 * job.cfl, reference=lifts)
        write_trajectory(twin, run_dir / "zero_perturbation", job.write_snapshots)
        case.psi_zero_max = float(max(r.psi_gamma for r in twin.diagnostics))
        case.psi_zero_bound = job.tolerance_psi_zero * abs(reference.diagnostics[0].energy)
        case.zero_ok = case.psi_zero_max <= case.psi_zero_bound

        # (b) δ, δ/2 섭동
        shape = np.sin(2 * np.pi * job.perturbation.mode_number * grid.nodes / grid.length)
        runs = {}
        for label, delta in (("delta", job.perturbation.delta), ("half_delta", 0.5 * job.perturbation.delta)):
            perturbed = smooth_state(rho0 + delta * shape, grid, params)
            runs[label] = simulate(perturbed, job.t_end, params, job.sample_every, cfl=job.cfl, reference=lifts)
            write_trajectory(runs[label], run_dir / label, job.write_snapshots)
    except NSKError as e:
        case.status = "failed"
        case.failure_time = getattr(e, "time", None)
        case.message = str(e)
        logger.error(f"❌ 약-강 케이스 γ={params.gamma:g}, s={params.s:g} 실패: {e}")
        return case

    times = runs["delta"].times
    psi_delta = [r.psi_gamma for r in runs["delta"].diagnostics]
    psi_half = [r.psi_gamma for r in runs["half_delta"].diagnostics]
    case.c_hat_delta = gronwall_rate(times, psi_delta)
    case.c_hat_half = gronwall_rate(times, psi_half)
    margin = 0.2 * max(abs(case.c_hat_delta), abs(case.c_hat_half)) + 0.01
    case.c_hat_ok = abs(case.c_hat_delta - case.c_hat_half) <= margin

    # δ 실행에서 얻은 Ĉ(여유 포함)로 δ/2 실행을 덮는지
    elapsed = np.asarray(times) - times[0]
    envelope = psi_half[0] * np.exp((case.c_hat_delta + 0.2 * abs(case.c_hat_delta) + 0.01) * elapsed)
    case.bound_ok = bool(np.all(np.asarray(psi_half) <= envelope * (1.0 + 1e-12)))
    case.ledger_residual = check_ledger_rate(runs["delta"], lifts, params).max_residual
    case.passed = case.zero_ok and case.c_hat_ok and case.bound_ok
    logger.info(f"🔁 γ={params.gamma:g}, s={params.s:g}: Ψ₀max={case.psi_zero_max:.2e}, "
                f"Ĉ(δ)={case.c_hat_delta:.4f}, Ĉ(δ/2)={case.c_hat_half:.4f}")
    return case


def run_weakstrong_study(cfg: StudyConfig, executor: Optional[ParallelRunExecutor] = None) -> WeakStrongReport:
    """(γ, s) 케이스마다 무섭동 쌍둥이 실행과 δ, δ/2 섭동 실행"""
    out = Path(cfg.output_dir)
    executor = executor or ParallelRunExecutor(cfg.workers)
    tracker = ProgressTracker("약-강 유일성 스터디", [StudyStage.WEAK_STRONG_RUNS, StudyStage.WRITE_OUTPUTS])
    grid = study_grid(cfg)
    cases = [
        apply_bump_threshold(p, cfg.bump_threshold_factor).ensure_valid(StudyMode.WEAKSTRONG)
        for p in cfg.weakstrong_params()
    ]
    labels = [f"gamma_{p.gamma:g}_s_{p.s:g}" for p in cases]
    write_json(out / "manifest.json", _study_manifest(cfg, "weakstrong", "running", cases=labels))

    tracker.update_stage(StudyStage.WEAK_STRONG_RUNS)
    jobs = [
        WeakStrongJob(
            params=p, grid=grid, profile=cfg.profile, perturbation=cfg.perturbation, t_end=cfg.t_end,
            sample_every=cfg.sample_every, cfl=cfg.cfl, tolerance_psi_zero=cfg.tolerance_psi_zero,
            run_dir=str(out / "cases" / label), write_snapshots=cfg.write_snapshots,
        )
        for p, label in zip(cases, labels)
    ]
    outcomes = _run_pool(executor, _weakstrong_case, jobs, labels, tracker)

    report = WeakStrongReport()
    for job, outcome in zip(jobs, outcomes):
        if outcome.ok:
            report.cases.append(outcome.result)
        else:
            report.cases.append(WeakStrongCase(
                gamma=job.params.gamma, s=job.params.s, nu=job.params.nu, status="failed",
                failure_time=getattr(outcome.error, "time", None), message=str(outcome.error),
            ))
    failed = [c for c in report.cases if c.status != "ok"]
    if failed:
        report.failure = {"stage": "weakstrong_run", "gamma": failed[0].gamma, "s": failed[0].s,
                          "time": failed[0].failure_time, "message": failed[0].message}
    report.passed = not failed and all(c.passed for c in report.cases)

    tracker.update_stage(StudyStage.WRITE_OUTPUTS)
    write_json(out / "weakstrong.json", report.to_dict(encode_json=True))
    write_json(out / "manifest.json", _study_manifest(
        cfg, "weakstrong", "failed" if failed else "completed", cases=labels,
        failure=report.failure, passed=report.passed,
    ))
    tracker.complete({"cases": len(report.cases), "passed": report.passed})
    return report


# ---------------------------------------------------------------------------
# 검사 스위트
# ---------------------------------------------------------------------------

def _case_label(params: Params) -> str:
    return f"γ={params.gamma:g},s={params.s:g}"


def identity_report(params: Params, n_samples: int, seed: int) -> CheckReport:
    """구성 법칙 항등식 잔차 (ρ ∈ [c_p, 3ρ_c])"""
    upper = 3.0 * params.bump.center
    residuals = identity_residuals(params, n_samples, seed, box=(params.rho_floor, upper))
    keys = ("pressure_enthalpy", "mu_prime_squared", "lambda_bd", "pressure_split")
    convexity_floor = -IDENTITY_TOLERANCE * upper**params.gamma
    violations = [{"identity": k, "residual": residuals[k]} for k in keys if not residuals[k] < IDENTITY_TOLERANCE]
    if not residuals["h_gamma_min"] >= convexity_floor:
        violations.append({"identity": "h_gamma_nonnegative", "residual": residuals["h_gamma_min"]})
    return CheckReport(
        name=f"constitutive_identities[{_case_label(params)}]",
        passed=not violations,
        max_residual=max(residuals[k] for k in keys),
        constants=residuals,
        violations=violations,
    )


def bohm_convergence(params: Params, grid_pair: Sequence[int]) -> CheckReport:
    """ρ = 2 + 0.3·sin(2πx/L)에서 거친/조밀 격자의 Bohm 잔차 비"""
    residuals = []
    for n in grid_pair:
        grid = Grid(int(n), params.domain_length)
        rho = 2.0 + 0.3 * np.sin(2 * np.pi * grid.nodes / grid.length)
        residuals.append(bohm_residual(rho, grid, params))
    coarse, fine = residuals
    ratio = coarse / max(fine, np.finfo(float).tiny)
    constant_grid = Grid(int(grid_pair[0]), params.domain_length)
    constant = bohm_residual(np.full(constant_grid.n_points, 2.0), constant_grid, params)
    return CheckReport(
        name=f"bohm_convergence[s={params.s:g}]",
        passed=(ratio >= BOHM_MIN_RATIO or coarse < BOHM_PLATEAU) and constant < BOHM_PLATEAU,
        max_residual=coarse,
        constants={"ratio": ratio, "coarse": coarse, "fine": fine, "constant": constant},
        details={"grid_pair": list(grid_pair)},
    )


def nonmonotone_report(params: Params) -> CheckReport:
    """A* 탐색 후 1.5·A*에서 비단조, A*/2에서 단조인지"""
    threshold = find_nonmonotone_threshold(params)
    bump = params.bump

    def interval(amplitude: float):
        return check_nonmonotone(params.with_updates(bump=BumpSpec(amplitude, bump.center, bump.halfwidth)))

    above, below = interval(1.5 * threshold), interval(0.5 * threshold)
    details: Dict[str, Any] = {"interval_above": above, "interval_below": below}
    if bump.amplitude != 0.0:
        details["configured_interval"] = check_nonmonotone(params)
    return CheckReport(
        name=f"nonmonotone_threshold[γ={params.gamma:g}]",
        passed=above is not None and below is None,
        constants={"threshold": threshold, "center": bump.center, "halfwidth": bump.halfwidth},
        details=details,
    )


def error_term_report(rho_bar: np.ndarray, grid: Grid, params: Params) -> CheckReport:
    """max|ē|/ε 의 ε 무관성과 리프트 연속 방정식 잔차"""
    scaled, continuity = [], []
    for eps in ERROR_TERM_EPSILONS:
        p = params.with_updates(epsilon=eps)
        scaled.append(float(np.max(np.abs(error_term(rho_bar, grid, p)))) / eps)
        (lift,) = lift_strong([(0.0, rho_bar)], grid, p)
        scale = max(1.0, grid.l2_norm(gf_rhs(rho_bar, grid, p)))
        continuity.append(continuity_residual(lift, p) / scale)
    top, bottom = max(scaled), min(scaled)
    spread = 1.0 if top == 0.0 else top / max(bottom, np.finfo(float).tiny)
    return CheckReport(
        name="error_term_order",
        passed=spread < ERROR_TERM_SPREAD and max(continuity) < 1e-9,
        max_residual=max(continuity),
        constants={"spread": spread},
        details={"epsilons": list(ERROR_TERM_EPSILONS), "max_e_over_eps": scaled, "continuity": continuity},
    )


def equilibrium_report(grid: Grid, params: Params, rho_star: float) -> CheckReport:
    """상수 상태가 step의 고정점인지"""
    state = State(time=0.0, rho=np.full(grid.n_points, rho_star), m=np.zeros(grid.n_points),
                  J=np.zeros(grid.n_points), grid=grid)
    dt = stable_dt(state, params)
    new_state = step(state, dt, params)
    deviation = max(float(np.max(np.abs(new_state.rho - state.rho))),
                    float(np.max(np.abs(new_state.m))), float(np.max(np.abs(new_state.J))))
    return CheckReport(
        name="equilibrium_exactness",
        passed=deviation <= 1e-12 * max(1.0, rho_star),
        max_residual=deviation,
        constants={"dt": dt, "rho_star": rho_star},
    )


def friction_report(params: Params, rho_star: float, m0: float = 0.5) -> CheckReport:
    """상수 ρ, m에서 한 스텝 후 m = m₀·exp(−dt/ε²) (dt/ε² ≤ 10⁶)"""
    grid = Grid(32, params.domain_length)
    quiet = params.with_updates(nu=0.0, friction=True,
                                bump=BumpSpec(0.0, params.bump.center, params.bump.halfwidth))
    errors = []
    for ratio in FRICTION_RATIOS:
        dt = ratio * quiet.epsilon**2
        state = State(time=0.0, rho=np.full(grid.n_points, rho_star), m=np.full(grid.n_points, m0),
                      J=np.zeros(grid.n_points), grid=grid)
        new_state = step(state, dt, quiet, enforce_cfl=False)
        errors.append(float(np.max(np.abs(new_state.m - m0 * math.exp(-ratio)))) / m0)
    return CheckReport(
        name="friction_exactness",
        passed=max(errors) <= 1e-12,
        max_residual=max(errors),
        details={"dt_over_eps2": list(FRICTION_RATIOS), "relative_errors": errors},
    )


def run_checks(cfg: StudyConfig) -> ChecksReport:
    """항등식, 점별 부등식, Bohm 수렴, 비단조 임계값, 오차항 차수, 평형/마찰 정확성"""
    out = Path(cfg.output_dir)
    tracker = ProgressTracker("검사 스위트", [StudyStage.CHECKS, StudyStage.WRITE_OUTPUTS])
    base = study_params(cfg)
    grid = study_grid(cfg)
    cases = [apply_bump_threshold(p, cfg.bump_threshold_factor) for p in cfg.check_params()]

    tracker.update_stage(StudyStage.CHECKS)
    tasks: List[Tuple[str, Callable[[], CheckReport]]] = []
    for case in cases:
        tasks.append((f"항등식 {_case_label(case)}", lambda c=case: identity_report(c, cfg.n_samples, cfg.seed)))
        tasks.append((f"점별 부등식 {_case_label(case)}", lambda c=case: _labelled(
            check_pointwise_inequalities(c, n_samples=cfg.n_samples, resolution=cfg.inequality_resolution,
                                         seed=cfg.seed), c)))
    for s in sorted({-1.0, 0.0} | {c.s for c in cases}):
        tasks.append((f"Bohm s={s:g}", lambda s=s: bohm_convergence(base.with_updates(s=s), cfg.bohm_grid_pair)))
    tasks.append(("비단조 임계값", lambda: nonmonotone_report(base)))
    tasks.append(("오차항 차수", lambda: error_term_report(initial_density(grid, cfg.profile), grid, base)))
    tasks.append(("평형 고정점", lambda: equilibrium_report(grid, base, cfg.profile.mean)))
    tasks.append(("마찰 정확성", lambda: friction_report(base, cfg.profile.mean)))

    report = ChecksReport()
    for index, (label, task) in enumerate(tasks, start=1):
        result = task()
        report.reports.append(result)
        mark = "✅" if result.passed else "❌"
        tracker.update_sub_progress(index / len(tasks), f"{label} {mark}")
    report.passed = all(r.passed for r in report.reports)

    tracker.update_stage(StudyStage.WRITE_OUTPUTS)
    write_json(out / "checks.json", report.to_dict(encode_json=True))
    write_json(out / "manifest.json", _study_manifest(cfg, "checks", "completed", passed=report.passed))
    tracker.complete({"checks": len(report.reports), "failed": sum(not r.passed for r in report.reports)})
    return report


def _labelled(report: CheckReport, params: Params) -> CheckReport:
    report.name = f"{report.name}[{_case_label(params)}]"
    return report


# ---------------------------------------------------------------------------
# 단일 실행
# ---------------------------------------------------------------------------

def _gradient_flow_reports(samples: Sequence[Tuple[float, np.ndarray]], grid: Grid, params: Params) -> List[CheckReport]:
    masses = np.array([grid.integrate(rho) for _, rho in samples])
    energies = np.array([gradient_flow_energy(rho, grid, params) for _, rho in samples])
    mass_drift = float(np.max(np.abs(masses - masses[0])) / abs(masses[0]))
    increase = float(np.max(np.diff(energies), initial=0.0))
    return [
        CheckReport(name="gf_mass_conservation", passed=mass_drift < MASS_TOLERANCE, max_residual=mass_drift),
        CheckReport(name="gf_energy_decay", passed=increase <= 1e-10 * abs(energies[0]), max_residual=increase,
                    details={"energies": energies.tolist()}),
    ]


def run_single(cfg: StudyConfig, kind: str = "single_run") -> SingleRunReport:
    """gradient_flow: ρ̄만 적분. single_run: 잘 준비된 초기값으로 ε 하나의 완화 실행"""
    mode = StudyMode(kind)
    if mode not in (StudyMode.SINGLE_RUN, StudyMode.GRADIENT_FLOW):
        raise ValueError(f"run 종류는 single_run 또는 gradient_flow (kind={kind})")
    out = Path(cfg.output_dir)
    tracker = ProgressTracker(f"단일 실행 ({mode.value})", [
        StudyStage.GRADIENT_FLOW, StudyStage.STRONG_LIFT, StudyStage.RELAXATION_RUNS, StudyStage.WRITE_OUTPUTS,
    ])
    params = study_params(cfg)
    grid = study_grid(cfg)
    gf = GradientFlowSettings.from_config(cfg)
    rho0 = initial_density(grid, cfg.profile)
    report = SingleRunReport(kind=mode.value)

    try:
        tracker.update_stage(StudyStage.GRADIENT_FLOW)
        samples = gf.solve(rho0, cfg.t_end, grid, params, cfg.sample_every, cfg.cfl)
        if mode == StudyMode.GRADIENT_FLOW:
            report.reports = _gradient_flow_reports(samples, grid, params)
            write_gradient_flow(samples, grid, params, out, cfg.write_snapshots,
                                extra={"versions": library_versions()})
        else:
            tracker.update_stage(StudyStage.STRONG_LIFT)
            lifts = lift_strong(samples, grid, params)
            tracker.update_stage(StudyStage.RELAXATION_RUNS)
            trajectory = simulate(well_prepared_state(lifts[0], params), cfg.t_end, params, cfg.sample_every,
                                  cfl=cfg.cfl, reference=lifts)
            records = trajectory.diagnostics
            mass_drift = max(abs(r.mass - records[0].mass) for r in records) / abs(records[0].mass)
            report.reports = [
                check_dissipation(trajectory),
                CheckReport(name="mass_conservation", passed=mass_drift < MASS_TOLERANCE, max_residual=mass_drift),
                ledger_window_report(rho0, grid, params, cfg.t_end, cfg.cfl, gf),
            ]
            write_trajectory(trajectory, out, cfg.write_snapshots, extra={
                "versions": library_versions(),
                "drift_constraint_residual": drift_constraint_residual(trajectory.snapshots[-1], params),
            })
    except NSKError as e:
        tracker.error(str(e))
        report.failure = _failure_info(e)
        write_json(out / "checks.json", report.to_dict(encode_json=True))
        return report

    tracker.update_stage(StudyStage.WRITE_OUTPUTS)
    report.passed = all(r.passed for r in report.reports)
    write_json(out / "checks.json", report.to_dict(encode_json=True))
    tracker.complete({"kind": mode.value, "passed": report.passed})
    return report
