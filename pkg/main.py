"""
NSK 완화 하네스 - 메인 파일 (명령줄 진입점)
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from config import StudyConfig, StudyMode, settings
from core.experiments import refit_sweep, run_checks, run_relaxation_study, run_single, run_weakstrong_study
from utils.errors import ConfigError, NSKError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_FAILURE = 2

SUBCOMMAND_MODES = {
    "run": None,  # --kind로 결정
    "relax": StudyMode.RELAXATION,
    "wsu": StudyMode.WEAKSTRONG,
    "check": StudyMode.CHECKS,
    "fit": StudyMode.RELAXATION,
}


def _float_list(text: str) -> List[float]:
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"쉼표로 구분된 실수 목록이 필요함: {text!r}") from e
    if not values:
        raise argparse.ArgumentTypeError("빈 목록")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsk", description="NSK 완화 시스템 시뮬레이션/검증 하네스")
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML 또는 JSON 설정 파일")
    common.add_argument("--n", type=int, help="격자점 수 N")
    common.add_argument("--t-end", type=float, help="최종 시각 T")
    common.add_argument("--output-dir", type=str, help="출력 디렉터리")
    common.add_argument("--seed", type=int, help="무작위 검사 시드")
    common.add_argument("--workers", type=int, help="병렬 워커 수")
    common.add_argument("--log-level", type=str, choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    run = subparsers.add_parser("run", parents=[common], help="단일 실행 (single_run / gradient_flow)")
    run.add_argument("--kind", choices=["single_run", "gradient_flow"], default="single_run")
    run.add_argument("--epsilon", type=float, help="ε")
    run.add_argument("--nu", type=float, help="ν")

    relax = subparsers.add_parser("relax", parents=[common], help="완화 차수 스윕")
    relax.add_argument("--epsilon", type=_float_list, help="ε 목록 (예: 0.2,0.1,0.05)")
    relax.add_argument("--nu", type=float, help="고정 ν (0이면 비점성)")
    relax.add_argument("--emit-plot-data", action="store_true", help="(ε, t, Ψ_γ) 정돈 CSV 작성")

    wsu = subparsers.add_parser("wsu", parents=[common], help="약-강 유일성 스터디")
    wsu.add_argument("--nu", type=float, help="약-강 스터디의 ν")

    subparsers.add_parser("check", parents=[common], help="구성 법칙/점별 부등식 검사 스위트")

    fit = subparsers.add_parser("fit", parents=[common], help="저장된 스윕 재피팅")
    fit.add_argument("--input", type=Path, required=True, help="sweep.csv가 있는 디렉터리")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """명령줄 플래그 → 점 경로 오버라이드"""
    mode = SUBCOMMAND_MODES[args.command] or StudyMode(args.kind)
    overrides: Dict[str, Any] = {"mode": mode.value}
    if args.n is not None:
        overrides["grid.n_points"] = args.n
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    if args.seed is not None:
        overrides["seed"] = args.seed

    output_dir = args.output_dir or settings.output_dir
    if output_dir:
        overrides["output_dir"] = output_dir
    workers = args.workers if args.workers is not None else settings.max_workers
    if workers is not None:
        overrides["workers"] = workers

    epsilon = getattr(args, "epsilon", None)
    nu = getattr(args, "nu", None)
    if args.command == "run":
        if epsilon is not None:
            overrides["params.epsilon"] = epsilon
        if nu is not None:
            overrides["params.nu"] = nu
    elif args.command == "relax":
        if epsilon is not None:
            overrides["epsilon_list"] = epsilon
        if nu is not None:
            overrides["nu_policy"] = {"kind": "zero"} if nu == 0 else {"kind": "fixed", "value": nu}
        if args.emit_plot_data:
            overrides["emit_plot_data"] = True
    elif args.command == "wsu" and nu is not None:
        overrides["weakstrong_nu"] = nu
    return overrides


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "fit":
        config = StudyConfig.load(args.config, {"mode": StudyMode.RELAXATION.value})
        assessment = refit_sweep(args.input, config.slope_threshold, config.ratio_spread_threshold)
        logger.info(f"📈 재피팅: slope={assessment.fit.slope:.4f}, r²={assessment.fit.r_squared:.4f}")
        return EXIT_OK if assessment.passed else EXIT_ASSERTION

    config = StudyConfig.load(args.config, _overrides(args))
    if args.command == "run":
        report = run_single(config, args.kind)
    elif args.command == "relax":
        report = run_relaxation_study(config)
    elif args.command == "wsu":
        report = run_weakstrong_study(config)
    else:
        report = run_checks(config)

    if getattr(report, "failure", None):
        logger.error(f"❌ 실행 실패: {report.failure}")
        return EXIT_FAILURE
    return EXIT_OK if report.passed else EXIT_ASSERTION


def main(argv: Optional[List[str]] = None) -> int:
    """종료 코드: 0 전체 통과, 1 검증 실패, 2 설정/실행 오류"""
    args = build_parser().parse_args(argv)
    level = args.log_level or settings.log_level
    logging.getLogger().setLevel(level)

    try:
        return _dispatch(args)
    except ConfigError as e:
        logger.error(f"⚙️ 설정 오류: {e}")
        return EXIT_FAILURE
    except NSKError as e:
        logger.error(f"❌ 솔버 오류: {e}", exc_info=True)
        return EXIT_FAILURE
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"❌ 입력 오류: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
