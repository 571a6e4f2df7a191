"""On-disk cache of computed spectra, keyed by request digests."""

import json
from datetime import datetime
from pathlib import Path
from typing import Any


class ResultCache:
    """JSON cache of mode tables, one entry per (star, request, tolerances) digest."""

    def __init__(self, cache_path: str | None = None):
        """Initialize cache with file path.

        Args:
            cache_path: Path to cache file. Defaults to data/.stellar_modes_cache.json
        """
        if cache_path is None:
            cache_path = "data/.stellar_modes_cache.json"
        self.cache_path = Path(cache_path)
        self.cache_path.parent.mkdir(parents=True, exist_ok=True)

        self.data: dict[str, Any] = {
            "spectra": {},
            "last_updated": None,
        }

    def load(self) -> bool:
        """Load cache from disk.

        Returns:
            True if cache was loaded, False if file doesn't exist or is invalid
        """
        if not self.cache_path.exists():
            return False

        try:
            content = self.cache_path.read_text(encoding="utf-8")
            data = json.loads(content)
        except (json.JSONDecodeError, IOError):
            return False
        if not isinstance(data, dict) or not isinstance(data.get("spectra"), dict):
            return False
        self.data = data
        return True

    def save(self) -> None:
        """Save cache to disk."""
        self.data["last_updated"] = datetime.now().isoformat()
        content = json.dumps(self.data, indent=2, ensure_ascii=False)
        self.cache_path.write_text(content, encoding="utf-8")

    def add_spectrum(self, key: str, modes: list[dict], **info: Any) -> None:
        """Store the mode rows of one request, replacing an older entry.

        Args:
            key: Request digest from RunConfig.request_key
            modes: Mode table rows
            **info: Extra fields stored next to the rows (e.g. star_key, l)
        """
        self.data["spectra"][key] = {
            "modes": modes,
            "computed_at": datetime.now().isoformat(),
            **info,
        }

    def is_cached(self, key: str) -> bool:
        return key in self.data["spectra"]

    def get_spectrum(self, key: str) -> list[dict] | None:
        """Mode rows stored under a key, or None."""
        entry = self.data["spectra"].get(key)
        return None if entry is None else entry["modes"]

    def get_entries(self) -> dict[str, dict]:
        return self.data.get("spectra", {})
