"""
스펙트럼 캐시 - 파수 곱셈자/디앨리어싱 마스크 LRU 캐싱
"""

import logging
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Hashable, Tuple

import numpy as np
from cachetools import LRUCache
from dataclasses_json import dataclass_json

logger = logging.getLogger(__name__)


@dataclass_json
@dataclass
class SpectralEntry:
    """캐시 엔트리 메타데이터"""
    kind: str          # "deriv", "dealias", "wavenumbers"
    n_points: int
    length: float
    order: int = 0
    hit_count: int = 0


class SpectralCache:
    """격자별 스펙트럼 배열 캐시 (프로세스마다 하나, 스레드 안전)"""

    def __init__(self, maxsize: int = 128):
        self.lru_cache = LRUCache(maxsize=maxsize)
        self.entries: Dict[Hashable, SpectralEntry] = {}
        self._lock = threading.Lock()
        self.stats = {
            "hits": 0,
            "misses": 0,
        }
        logger.debug("스펙트럼 캐시 초기화 완료")

    @staticmethod
    def _generate_key(kind: str, n_points: int, length: float, order: int) -> Tuple:
        return (kind, int(n_points), float(length), int(order))

    def get_or_build(self, kind: str, n_points: int, length: float, order: int,
                     builder: Callable[[], np.ndarray]) -> np.ndarray:
        """캐시에 있으면 반환, 없으면 builder로 생성 후 저장

        반환 배열은 읽기 전용이다.
        """
        key = self._generate_key(kind, n_points, length, order)
        with self._lock:
            cached = self.lru_cache.get(key)
            if cached is not None:
                self.stats["hits"] += 1
                entry = self.entries.get(key)
                if entry is not None:
                    entry.hit_count += 1
                return cached
            self.stats["misses"] += 1

        value = np.asarray(builder())
        value.flags.writeable = False

        with self._lock:
            self.lru_cache[key] = value
            self.entries[key] = SpectralEntry(kind=kind, n_points=n_points, length=length, order=order)
            # LRU에서 밀려난 항목의 메타데이터 정리
            for stale in [k for k in self.entries if k not in self.lru_cache]:
                del self.entries[stale]
        return value

    def clear(self):
        with self._lock:
            self.lru_cache.clear()
            self.entries.clear()
            self.stats = {"hits": 0, "misses": 0}

    def get_stats(self) -> Dict:
        """캐시 통계 반환"""
        total = self.stats["hits"] + self.stats["misses"]
        hit_rate = (self.stats["hits"] / total * 100) if total > 0 else 0.0
        return {
            **self.stats,
            "hit_rate": f"{hit_rate:.1f}%",
            "size": len(self.lru_cache),
            "entries": [entry.to_dict() for entry in self.entries.values()],
        }


# 싱글톤 인스턴스
spectral_cache = SpectralCache()
