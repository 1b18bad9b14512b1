"""
출력 작성기 - 원자적 JSON/CSV/바이너리 쓰기
"""

import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """numpy 스칼라/배열과 비유한 실수를 JSON 호환 값으로"""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.generic):
        return _jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@retry(stop=stop_after_attempt(3), wait=wait_exponential(multiplier=0.1, min=0.1, max=2),
       retry=retry_if_exception_type(OSError))
def _atomic_write(path: Path, writer: Callable[[Path], None]):
    """임시 파일에 쓰고 os.replace로 교체"""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    os.close(fd)
    tmp = Path(tmp_name)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise


def write_json(path: Path, payload: Any):
    text = json.dumps(_jsonable(payload), indent=2, ensure_ascii=False, sort_keys=False)
    _atomic_write(Path(path), lambda tmp: tmp.write_text(text + "\n", encoding="utf-8"))
    logger.debug(f"💾 JSON 저장: {path}")


def write_frame(path: Path, frame: pd.DataFrame):
    _atomic_write(Path(path), lambda tmp: frame.to_csv(tmp, index=False, float_format="%.17g"))
    logger.debug(f"💾 CSV 저장: {path} ({len(frame)}행)")


def write_bytes(path: Path, payload: bytes):
    _atomic_write(Path(path), lambda tmp: tmp.write_bytes(payload))
