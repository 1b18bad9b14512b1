"""
예외 계층 - 솔버/설정 오류 정의
"""

from typing import Optional


class NSKError(Exception):
    """솔버 실행 중 발생하는 모든 오류의 기반 클래스 (CLI 종료 코드 2)"""


class DomainError(NSKError, ValueError):
    """구성 법칙에 양수가 아닌 밀도가 전달됨"""


class PositivityError(NSKError):
    """밀도가 rho_floor 아래로 떨어짐"""

    def __init__(self, message: str, time: Optional[float] = None, min_rho: Optional[float] = None):
        super().__init__(message)
        self.time = time
        self.min_rho = min_rho

    def __reduce__(self):
        return self.__class__, (self.args[0], self.time, self.min_rho)


class CFLViolation(NSKError):
    """요청된 dt가 안정 한계를 넘음"""

    def __init__(self, message: str, dt: float = float("nan"), limit: float = float("nan")):
        super().__init__(message)
        self.dt = dt
        self.limit = limit

    def __reduce__(self):
        return self.__class__, (self.args[0], self.dt, self.limit)


class ResolutionError(NSKError):
    """스펙트럼 꼬리 검사 실패 (해상도 부족)"""

    def __init__(self, message: str, tail_ratio: float = float("nan")):
        super().__init__(message)
        self.tail_ratio = tail_ratio

    def __reduce__(self):
        return self.__class__, (self.args[0], self.tail_ratio)


class NonFiniteError(NSKError, ValueError):
    """NaN/Inf 감지"""


class AlignmentError(NSKError, ValueError):
    """격자 또는 시간이 맞지 않는 쌍"""


class SimulationFailure(NSKError):
    """스텝 실패를 실패 시각과 함께 감싼 오류"""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t={time:.6g})")
        self.message = message
        self.time = time

    def __reduce__(self):
        # 프로세스 풀 경계를 넘을 때 원래 인자로 복원
        return self.__class__, (self.message, self.time)


class ConfigError(ValueError):
    """설정 파싱/검증 오류 (필드 경로와 줄 번호 포함)"""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        parts = [message]
        if field:
            parts.append(f"field={field}")
        if line is not None:
            parts.append(f"line={line}")
        super().__init__(" | ".join(parts))
        self.field = field
        self.line = line
