"""
실행 관리자 - 스윕 포인트 병렬 실행
"""

import asyncio
import logging
from collections import defaultdict
from concurrent.futures import Executor, ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    """단일 실행 결과"""
    index: int
    result: Any = None
    error: Optional[BaseException] = None
    label: str = ""

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExecutorStats:
    submitted: int = 0
    completed: int = 0
    failed: int = 0
    errors: Dict[str, int] = field(default_factory=lambda: defaultdict(int))


class ParallelRunExecutor:
    """독립 실행들을 워커 풀에서 병렬 실행

    각 작업은 피클 가능한 최상위 함수와 인자 하나로 주어진다.
    결과는 입력 순서대로 반환되며, 실패한 작업은 예외를 담은 RunOutcome이 된다.
    """

    def __init__(self, max_workers: int = 1, use_processes: Optional[bool] = None):
        self.max_workers = max(1, int(max_workers))
        # 워커 1개면 스레드 하나로 충분
        self.use_processes = self.max_workers > 1 if use_processes is None else use_processes
        self.stats = ExecutorStats()
        logger.info(f"실행 관리자 초기화 완료 (workers={self.max_workers}, "
                    f"{'process' if self.use_processes else 'thread'})")

    def _make_pool(self) -> Executor:
        if self.use_processes:
            return ProcessPoolExecutor(max_workers=self.max_workers)
        return ThreadPoolExecutor(max_workers=self.max_workers)

    async def execute(self, func: Callable[[Any], Any], payloads: List[Any],
                      labels: Optional[List[str]] = None,
                      progress_callback: Optional[Callable[[int, int, RunOutcome], Awaitable[None]]] = None
                      ) -> List[RunOutcome]:
        """payload마다 func를 실행"""
        labels = labels or [str(i) for i in range(len(payloads))]
        semaphore = asyncio.Semaphore(self.max_workers)
        loop = asyncio.get_running_loop()
        completed = 0

        with self._make_pool() as pool:

            async def run_with_semaphore(payload, index):
                nonlocal completed
                async with semaphore:
                    self.stats.submitted += 1
                    try:
                        result = await loop.run_in_executor(pool, func, payload)
                        outcome = RunOutcome(index=index, result=result, label=labels[index])
                        self.stats.completed += 1
                    except Exception as e:
                        logger.error(f"실행 {labels[index]} 오류: {e}")
                        self.stats.failed += 1
                        self.stats.errors[type(e).__name__] += 1
                        outcome = RunOutcome(index=index, error=e, label=labels[index])

                    completed += 1
                    if progress_callback:
                        await progress_callback(completed, len(payloads), outcome)
                    return outcome

            outcomes = await asyncio.gather(*[
                run_with_semaphore(payload, i) for i, payload in enumerate(payloads)
            ])

        # 원래 순서대로 정렬
        return sorted(outcomes, key=lambda o: o.index)

    def run(self, func: Callable[[Any], Any], payloads: List[Any],
            labels: Optional[List[str]] = None) -> List[RunOutcome]:
        """동기 진입점"""
        return asyncio.run(self.execute(func, payloads, labels))

    def get_stats(self) -> Dict[str, Any]:
        return {
            "submitted": self.stats.submitted,
            "completed": self.stats.completed,
            "failed": self.stats.failed,
            "errors": dict(self.stats.errors),
        }
