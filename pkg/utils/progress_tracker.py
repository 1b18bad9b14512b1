"""
진행 상황 추적 - 스터디 단계별 로그
"""

import logging
import time
from enum import Enum
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class StudyStage(Enum):
    """진행 단계"""
    GRADIENT_FLOW = ("🌊", "그래디언트 플로우 적분", 3)
    STRONG_LIFT = ("🧱", "강해 리프트 구성", 1)
    RELAXATION_RUNS = ("⚙️", "완화 시스템 시뮬레이션", 10)
    WEAK_STRONG_RUNS = ("🔁", "약-강 섭동 실행", 8)
    CHECKS = ("🔍", "항등식/부등식 검사", 2)
    RATE_FIT = ("📈", "수렴 차수 피팅", 1)
    WRITE_OUTPUTS = ("💾", "결과 저장", 1)

    def __init__(self, emoji: str, description: str, weight: int):
        self.emoji = emoji
        self.description = description
        self.weight = weight  # 상대 비중


class ProgressTracker:
    """로그 기반 진행 상황 추적"""

    def __init__(self, title: str, stages: Optional[List[StudyStage]] = None,
                 log: Optional[logging.Logger] = None):
        self.title = title
        self.stages = stages or list(StudyStage)
        self.log = log or logger
        self.start_time = time.monotonic()
        self.current_stage: Optional[StudyStage] = None
        self.completed_stages: List[StudyStage] = []
        self.sub_progress: Dict[str, float] = {}
        self.log.info(f"🚀 {title} 시작")

    @property
    def overall_progress(self) -> float:
        total = sum(stage.weight for stage in self.stages) or 1
        done = sum(stage.weight for stage in self.completed_stages if stage in self.stages)
        if self.current_stage in self.stages and self.current_stage not in self.completed_stages:
            done += self.current_stage.weight * self.sub_progress.get(self.current_stage.name, 0.0)
        return min(1.0, done / total)

    def update_stage(self, stage: StudyStage, sub_progress: float = 0.0):
        """새로운 단계로 업데이트"""
        if self.current_stage and self.current_stage not in self.completed_stages:
            self.completed_stages.append(self.current_stage)
        self.current_stage = stage
        self.sub_progress[stage.name] = sub_progress
        self.log.info(f"{stage.emoji} {stage.description} {self._create_progress_bar(self.overall_progress)}")

    def update_sub_progress(self, progress: float, detail: str = ""):
        """현재 단계의 세부 진행률 업데이트"""
        if not self.current_stage:
            return
        self.sub_progress[self.current_stage.name] = progress
        suffix = f" - {detail}" if detail else ""
        self.log.info(f"   🔄 {self.current_stage.description} {progress * 100:.0f}%{suffix}")

    def complete(self, summary: Optional[Dict[str, Any]] = None):
        """완료"""
        if self.current_stage and self.current_stage not in self.completed_stages:
            self.completed_stages.append(self.current_stage)
        elapsed = time.monotonic() - self.start_time
        self.log.info(f"✅ {self.title} 완료 ({elapsed:.1f}초)")
        for key, value in (summary or {}).items():
            self.log.info(f"   • {key}: {value}")

    def error(self, error_message: str):
        """오류 발생"""
        stage = self.current_stage.description if self.current_stage else "-"
        self.log.error(f"❌ {self.title} 실패 [{stage}]: {error_message}")

    @staticmethod
    def _create_progress_bar(progress: float, length: int = 20) -> str:
        filled = int(round(progress * length))
        return f"[{'█' * filled}{'░' * (length - filled)}] {progress * 100:.0f}%"
