"""
NSK 완화 하네스 - 설정 관리
"""

import dataclasses
import json
import logging
import math
import os
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union, get_args, get_origin, get_type_hints

from dataclasses_json import dataclass_json
from dotenv import load_dotenv

from utils.errors import ConfigError

# 환경 변수 로드
load_dotenv()

# 로깅 설정
logging.basicConfig(
    level=os.getenv('NSK_LOG_LEVEL', 'INFO').upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class LameKind(str, Enum):
    BD_MATCHED = "bd_matched"   # μ_L = μ, λ_L = λ
    SCALED = "scaled"           # μ_L = αμ, λ_L = αλ


class S2Scaling(str, Enum):
    UNIT = "unit"
    INV_EPSILON = "inv_epsilon"


class StudyMode(str, Enum):
    RELAXATION = "relaxation"
    WEAKSTRONG = "weakstrong"
    CHECKS = "checks"
    SINGLE_RUN = "single_run"
    GRADIENT_FLOW = "gradient_flow"


class NuPolicyKind(str, Enum):
    ZERO = "zero"
    FIXED = "fixed"
    SCALED = "scaled"   # ν = value·ε


@dataclass_json
@dataclass
class BumpSpec:
    """비단조 압력용 범프 e(ρ) = A·exp(−1/(1−z²))"""
    amplitude: float = 0.0
    center: float = 2.0
    halfwidth: float = 0.5

    def validate(self) -> List[str]:
        problems = []
        if not math.isfinite(self.amplitude):
            problems.append("params.bump.amplitude: 유한값이어야 함")
        if not self.center > 0:
            problems.append("params.bump.center: ρ_c > 0 이어야 함")
        if not 0 < self.halfwidth < self.center:
            problems.append("params.bump.halfwidth: 0 < w < ρ_c 이어야 함")
        return problems


@dataclass_json
@dataclass
class LameMode:
    """점성 라메 계수 선택"""
    kind: LameKind = LameKind.BD_MATCHED
    alpha: float = 1.0  # SCALED 전용

    def validate(self) -> List[str]:
        if self.kind == LameKind.SCALED and not self.alpha >= 0:
            return ["params.lame_mode.alpha: α ≥ 0 이어야 함"]
        return []


@dataclass_json
@dataclass
class Params:
    """물리/모델 상수"""
    gamma: float = 2.0
    s: float = -1.0
    epsilon: float = 0.1
    nu: float = 0.0
    bump: BumpSpec = field(default_factory=BumpSpec)
    lame_mode: LameMode = field(default_factory=LameMode)
    rho_floor: float = 1e-3
    domain_length: float = 2 * math.pi
    s2_scaling: S2Scaling = S2Scaling.INV_EPSILON
    friction: bool = True

    @property
    def mu_exponent(self) -> float:
        """μ(ρ) = ρ^a, a = (s+3)/2"""
        return (self.s + 3.0) / 2.0

    def with_updates(self, **changes) -> 'Params':
        return dataclasses.replace(self, **changes)

    def validate(self, study: Optional[Union[StudyMode, str]] = None) -> List[str]:
        """범위 검증 - 문제 목록 반환"""
        problems = []
        if not self.gamma > 1:
            problems.append("params.gamma: γ > 1 이어야 함")
        if not self.s >= -1:
            problems.append("params.s: s ≥ −1 이어야 함")
        if not self.epsilon > 0:
            problems.append("params.epsilon: ε > 0 이어야 함")
        if not self.nu >= 0:
            problems.append("params.nu: ν ≥ 0 이어야 함")
        if not self.rho_floor > 0:
            problems.append("params.rho_floor: c_p > 0 이어야 함")
        if not self.domain_length > 0:
            problems.append("params.domain_length: L > 0 이어야 함")
        problems.extend(self.bump.validate())
        problems.extend(self.lame_mode.validate())

        study = StudyMode(study) if study is not None else None
        if study == StudyMode.RELAXATION and self.s > self.gamma - 2 + 1e-12:
            problems.append(f"params.s: 완화 스터디는 s ≤ γ−2 필요 (s={self.s}, γ={self.gamma})")
        if study == StudyMode.WEAKSTRONG:
            if self.s > 2 * self.gamma - 3 + 1e-12:
                problems.append(f"params.s: 약-강 스터디는 s ≤ 2γ−3 필요 (s={self.s}, γ={self.gamma})")
            if self.lame_mode.kind != LameKind.BD_MATCHED:
                problems.append("params.lame_mode: 약-강 스터디는 bd_matched 필요")
            if not self.nu > 0:
                problems.append("params.nu: 약-강 스터디는 ν > 0 필요")
        return problems

    def ensure_valid(self, study: Optional[Union[StudyMode, str]] = None) -> 'Params':
        problems = self.validate(study)
        if problems:
            raise ConfigError("; ".join(problems), field=problems[0].split(":")[0])
        return self


@dataclass_json
@dataclass
class GridSpec:
    n_points: int = 256
    length: float = 2 * math.pi


@dataclass_json
@dataclass
class InitialProfile:
    """ρ₀(x) = mean + amplitude·sin(2π·mode·x/L)"""
    mean: float = 2.0
    amplitude: float = 0.3
    mode: int = 1


@dataclass_json
@dataclass
class Perturbation:
    """약-강 스터디용 초기 섭동"""
    delta: float = 1e-3
    mode_number: int = 1


@dataclass_json
@dataclass
class NuPolicy:
    kind: NuPolicyKind = NuPolicyKind.ZERO
    value: float = 0.0

    def resolve(self, epsilon: float) -> float:
        if self.kind == NuPolicyKind.ZERO:
            return 0.0
        if self.kind == NuPolicyKind.FIXED:
            return float(self.value)
        return float(self.value) * float(epsilon)


@dataclass_json
@dataclass
class StudyConfig:
    """실험 설정 전체"""
    mode: StudyMode = StudyMode.RELAXATION
    params: Params = field(default_factory=Params)
    grid: GridSpec = field(default_factory=GridSpec)
    profile: InitialProfile = field(default_factory=InitialProfile)
    epsilon_list: List[float] = field(default_factory=lambda: [0.2, 0.1, 0.05])
    nu_policy: NuPolicy = field(default_factory=NuPolicy)
    t_end: float = 0.5
    sample_every: float = 0.01
    perturbation: Perturbation = field(default_factory=Perturbation)
    seed: int = 0
    output_dir: str = "output"
    cfl: float = 0.3
    gf_scheme: str = "etd2"
    gf_max_dt: float = 1e-3
    gf_tail_tolerance: float = 1e-10   # ρ̄ 스펙트럼 꼬리 허용치
    workers: int = 1
    bump_threshold_factor: Optional[float] = None
    write_snapshots: bool = False
    emit_plot_data: bool = False
    # 검사 스위트
    weakstrong_cases: List[List[float]] = field(default_factory=lambda: [[2.0, -1.0], [2.0, 1.0], [3.0, 3.0]])
    weakstrong_nu: float = 0.05
    check_cases: List[List[float]] = field(default_factory=lambda: [[2.0, -1.0], [2.0, 0.0], [3.0, 2.0], [3.0, 3.0]])
    n_samples: int = 100_000
    inequality_resolution: int = 2000
    bohm_grid_pair: List[int] = field(default_factory=lambda: [16, 32])
    tolerance_psi_zero: float = 1e-10
    slope_threshold: float = 3.5
    ratio_spread_threshold: float = 3.0

    def validate(self) -> List[str]:
        if any(len(case) != 2 for case in self.weakstrong_cases + self.check_cases):
            return ["weakstrong_cases/check_cases: 각 항목은 [γ, s]"]
        if self.mode == StudyMode.WEAKSTRONG:
            problems = []
            for case in self.weakstrong_params():
                problems.extend(p for p in case.validate(self.mode) if p not in problems)
        else:
            problems = self.params.validate(self.mode)
        n = self.grid.n_points
        if n < 16 or n & (n - 1):
            problems.append("grid.n_points: 16 이상의 2의 거듭제곱이어야 함")
        if not self.grid.length > 0:
            problems.append("grid.length: L > 0 이어야 함")
        if not self.t_end > 0:
            problems.append("t_end: 양수여야 함")
        if not 0 < self.sample_every <= self.t_end:
            problems.append("sample_every: 0 < sample_every ≤ t_end 이어야 함")
        if not 0 < self.cfl <= 1:
            problems.append("cfl: 0 < C_cfl ≤ 1 이어야 함")
        if self.gf_scheme not in ("etd2", "ssp_rk3"):
            problems.append("gf_scheme: 'etd2' 또는 'ssp_rk3'")
        if not 0 < self.gf_tail_tolerance < 1:
            problems.append("gf_tail_tolerance: 0 < tol < 1 이어야 함")
        if self.mode == StudyMode.RELAXATION:
            eps = self.epsilon_list
            if len(eps) < 2:
                problems.append("epsilon_list: 피팅에는 2개 이상 필요")
            if any(b >= a for a, b in zip(eps, eps[1:])):
                problems.append("epsilon_list: 엄격히 감소해야 함")
            if any(e <= 0 for e in eps):
                problems.append("epsilon_list: 모든 ε > 0")
        if self.mode == StudyMode.WEAKSTRONG and not self.perturbation.delta > 0:
            problems.append("perturbation.delta: 약-강 모드에서 δ > 0 필요")
        if self.profile.mean - abs(self.profile.amplitude) <= self.params.rho_floor:
            problems.append("profile: 초기 밀도가 rho_floor 아래로 내려감")
        if self.n_samples < 10_000 and self.mode == StudyMode.CHECKS:
            problems.append("n_samples: 부등식 검사는 10⁴ 이상 필요")
        if self.bump_threshold_factor is not None and not self.bump_threshold_factor > 0:
            problems.append("bump_threshold_factor: 양수여야 함")
        if len(self.bohm_grid_pair) != 2:
            problems.append("bohm_grid_pair: [N_coarse, N_fine]")
        return problems

    def resolved_params(self) -> Params:
        """격자 길이를 반영한 Params"""
        return self.params.with_updates(domain_length=float(self.grid.length))

    def weakstrong_params(self) -> List[Params]:
        """약-강 케이스별 Params (ε = 1, 마찰 없음, ν = weakstrong_nu)"""
        base = self.resolved_params().with_updates(epsilon=1.0, friction=False, nu=self.weakstrong_nu)
        cases = self.weakstrong_cases or [[base.gamma, base.s]]
        return [base.with_updates(gamma=float(g), s=float(s)) for g, s in cases]

    def check_params(self) -> List[Params]:
        """점별 부등식 검사 케이스별 Params"""
        base = self.resolved_params()
        cases = self.check_cases or [[base.gamma, base.s]]
        return [base.with_updates(gamma=float(g), s=float(s)) for g, s in cases]

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> 'StudyConfig':
        """TOML/JSON 파일에서 설정 로드 후 오버라이드 적용, 검증"""
        data: Dict[str, Any] = {}
        if path is not None:
            data = _read_config_file(Path(path))
        config = _build_dataclass(cls, data, "")
        for key, value in (overrides or {}).items():
            _apply_override(config, key, value)
        problems = config.validate()
        if problems:
            raise ConfigError("; ".join(problems), field=problems[0].split(":")[0])
        logger.info(f"⚙️ 설정 로드 완료: mode={config.mode.value}, N={config.grid.n_points}, "
                    f"ε={config.epsilon_list}, γ={config.params.gamma}, s={config.params.s}")
        return config


@dataclass
class RuntimeSettings:
    """환경 변수 기반 실행 설정"""
    output_dir: Optional[str] = None
    log_level: str = "INFO"
    max_workers: Optional[int] = None

    @classmethod
    def from_env(cls) -> 'RuntimeSettings':
        workers = os.getenv('NSK_MAX_WORKERS')
        return cls(
            output_dir=os.getenv('NSK_OUTPUT_DIR'),
            log_level=os.getenv('NSK_LOG_LEVEL', 'INFO').upper(),
            max_workers=int(workers) if workers and workers.isdigit() else None,
        )


def _read_config_file(path: Path) -> Dict[str, Any]:
    if not path.exists():
        raise ConfigError(f"설정 파일 없음: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON 파싱 오류: {e.msg}", line=e.lineno) from e
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            match = re.search(r"line (\d+)", str(e))
            raise ConfigError(f"TOML 파싱 오류: {e}", line=int(match.group(1)) if match else None) from e
    if not isinstance(data, dict):
        raise ConfigError("설정 최상위는 테이블이어야 함")
    return data


def _convert(hint: Any, value: Any, path: str) -> Any:
    """타입 힌트에 맞춰 값 변환 (실패 시 ConfigError)"""
    origin = get_origin(hint)
    if origin is Union:
        args = [a for a in get_args(hint) if a is not type(None)]
        if value is None:
            return None
        return _convert(args[0], value, path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError("리스트가 필요함", field=path)
        (inner,) = get_args(hint) or (Any,)
        return [_convert(inner, item, f"{path}[{i}]") for i, item in enumerate(value)]
    if dataclasses.is_dataclass(hint):
        if not isinstance(value, dict):
            raise ConfigError("테이블이 필요함", field=path)
        return _build_dataclass(hint, value, f"{path}.")
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as e:
            choices = ", ".join(m.value for m in hint)
            raise ConfigError(f"허용값: {choices}", field=path) from e
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError("불리언이 필요함", field=path)
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError("정수가 필요함", field=path)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("숫자가 필요함", field=path)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError("문자열이 필요함", field=path)
        return value
    return value


def _build_dataclass(cls, data: Dict[str, Any], prefix: str):
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError("알 수 없는 키", field=f"{prefix}{unknown[0]}")
    kwargs = {
        key: _convert(hints[key], value, f"{prefix}{key}")
        for key, value in data.items()
    }
    return cls(**kwargs)


def _apply_override(config: StudyConfig, dotted: str, value: Any):
    """'params.nu' 같은 점 경로로 값 덮어쓰기"""
    target: Any = config
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not hasattr(target, part):
            raise ConfigError("알 수 없는 오버라이드", field=dotted)
        target = getattr(target, part)
    leaf = parts[-1]
    if not dataclasses.is_dataclass(target) or leaf not in {f.name for f in dataclasses.fields(target)}:
        raise ConfigError("알 수 없는 오버라이드", field=dotted)
    hint = get_type_hints(type(target))[leaf]
    setattr(target, leaf, _convert(hint, value, dotted))


settings = RuntimeSettings.from_env()
