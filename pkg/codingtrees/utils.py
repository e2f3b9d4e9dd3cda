import inspect
import os
import tempfile
from functools import wraps
from pathlib import Path
from typing import Callable, Optional

from codingtrees.config import config
from codingtrees.history import RunStatus


def save_artifact(path: Path | str, text: str) -> Path:
    """Write ``text`` to ``path`` atomically (temp file in the same directory, then replace)."""
    path = Path(path)
    path.parent.mkdir(exist_ok=True, parents=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def save_report(filename: str = "run_history.json"):
    """Decorator factory that saves ``self.history`` after each call"""

    def decorator(func):
        def _dump(self):
            if getattr(self, "history", None) is not None and getattr(self, "persist", True):
                save_artifact(Path(config.output_path) / filename, self.history.model_dump_json(indent=2))

        @wraps(func)
        async def async_wrapper(self, *args, **kwargs):
            try:
                return await func(self, *args, **kwargs)
            finally:
                _dump(self)

        @wraps(func)
        def sync_wrapper(self, *args, **kwargs):
            try:
                return func(self, *args, **kwargs)
            finally:
                _dump(self)

        return async_wrapper if inspect.iscoroutinefunction(func) else sync_wrapper

    return decorator


def emit_status(
    callback: Optional[Callable[[RunStatus], None]], task_name: str, status: str, progress: float | None = None
) -> None:
    if callback is not None:
        callback(RunStatus(task_name=task_name, status=status, progress=progress))
