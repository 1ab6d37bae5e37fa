"""Data acquisition: usage CSVs, registry download counts, issue timelines.

Every HTTP response is cached content-addressed on disk, so a warm cache
replays analyses bit for bit with zero network traffic.  Live calls go
through a pluggable transport; tests plug in recorded fixtures, the CLI
plugs in requests only when explicitly asked to go live.
"""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable
from urllib.parse import quote

import numpy as np

from .quality import DailySeries, UsageRecord

log = logging.getLogger(__name__)

USAGE_HEADER = ("date", "release", "new_users", "users", "new_visits",
                "visits", "time_on_site", "exceptions")


class SchemaMismatchError(ValueError):
    """CSV header does not match the usage-record schema."""


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class HttpError(RuntimeError):
    def __init__(self, status: int, url: str):
        super().__init__(f"HTTP {status} for {url}")
        self.status = status
        self.url = url


class RateLimitedError(RuntimeError):
    """Retries exhausted while the server kept rate limiting."""


class OfflineCacheMissError(RuntimeError):
    """Cold cache and no live transport; rerun with live fetching enabled."""


class TruncatedPaginationError(RuntimeError):
    """Pagination broke off before the advertised last page."""


class GapInSeriesError(ValueError):
    """Downloads do not cover the requested date range."""


def load_usage_csv(path: str | Path) -> list[UsageRecord]:
    """Typed usage records from CSV; bad rows are rejected by line number."""
    path = Path(path)
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or tuple(header) != USAGE_HEADER:
            raise SchemaMismatchError(
                f"{path}: expected header {','.join(USAGE_HEADER)}")
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(USAGE_HEADER):
                raise ParseError(lineno, f"expected {len(USAGE_HEADER)} fields")
            try:
                records.append(UsageRecord(
                    date=dt.date.fromisoformat(row[0]),
                    release=row[1],
                    new_users=int(row[2]),
                    users=int(row[3]),
                    new_visits=int(row[4]),
                    visits=int(row[5]),
                    time_on_site=float(row[6]),
                    exceptions=int(row[7]),
                ))
            except (ValueError, TypeError) as exc:
                raise ParseError(lineno, str(exc)) from None
    return records


def write_usage_csv(path: str | Path, records: list[UsageRecord]) -> None:
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(USAGE_HEADER)
        for r in records:
            writer.writerow([r.date.isoformat(), r.release, r.new_users,
                             r.users, r.new_visits, r.visits,
                             ("%g" % r.time_on_site), r.exceptions])


# ---------------------------------------------------------------------------
# transport and cache


@dataclass(frozen=True)
class TransportResponse:
    status: int
    headers: dict[str, str]
    body: bytes


Transport = Callable[[str, dict, dict], TransportResponse]


def requests_transport(timeout: float = 30.0) -> Transport:
    """Live transport; imported lazily so offline use never needs it."""
    import requests

    def fetch(url: str, params: dict, headers: dict) -> TransportResponse:
        response = requests.get(url, params=params, headers=headers,
                                timeout=timeout)
        return TransportResponse(response.status_code,
                                 {k.lower(): v for k, v in response.headers.items()},
                                 response.content)
    return fetch


class HttpCache:
    """Content-addressed response store: write-once, never evicted.

    Bodies live under objects/<key>; a JSON sidecar keeps status and
    headers; index.json maps keys back to their request for humans.  All
    writes go through a temp file and rename, so readers never see a torn
    entry.
    """

    def __init__(self, cache_dir: str | Path):
        self.root = Path(cache_dir)
        self.objects = self.root / "objects"
        self.objects.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    @staticmethod
    def key(url: str, params: dict | None) -> str:
        canonical = url + "?" + json.dumps(params or {}, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()

    def get(self, key: str) -> TransportResponse | None:
        body_path = self.objects / key
        meta_path = self.objects / f"{key}.meta.json"
        if not body_path.exists() or not meta_path.exists():
            return None
        meta = json.loads(meta_path.read_text())
        return TransportResponse(meta["status"], meta["headers"],
                                 body_path.read_bytes())

    def put(self, key: str, url: str, params: dict | None,
            response: TransportResponse) -> None:
        with self._lock:
            self._atomic_write(self.objects / key, response.body)
            meta = {"status": response.status, "headers": response.headers,
                    "fetched_at": dt.datetime.now(dt.timezone.utc).isoformat()}
            self._atomic_write(self.objects / f"{key}.meta.json",
                               json.dumps(meta, indent=2).encode())
            index_path = self.root / "index.json"
            index = {}
            if index_path.exists():
                index = json.loads(index_path.read_text())
            index[key] = {"url": url, "params": params or {}}
            self._atomic_write(index_path,
                               json.dumps(index, indent=2, sort_keys=True).encode())

    @staticmethod
    def _atomic_write(path: Path, payload: bytes) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(payload)
        tmp.replace(path)


RETRYABLE = frozenset({429, 500, 502, 503, 504})


class CachedHttp:
    """Cache-first HTTP with retry, backoff, and rate-limit patience."""

    def __init__(self, cache: HttpCache, transport: Transport | None = None,
                 max_attempts: int = 5, backoff: float = 0.5,
                 sleeper: Callable[[float], None] = time.sleep):
        self.cache = cache
        self.transport = transport
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.sleeper = sleeper
        self.network_calls = 0
        self._lock = threading.Lock()

    def get(self, url: str, params: dict | None = None,
            headers: dict | None = None) -> TransportResponse:
        key = self.cache.key(url, params)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        if self.transport is None:
            raise OfflineCacheMissError(
                f"no cached response for {url} and live fetching is disabled; "
                "rerun with live mode enabled to populate the cache")
        response = self._fetch_with_retry(url, params or {}, headers or {})
        self.cache.put(key, url, params, response)
        return response

    def _fetch_with_retry(self, url: str, params: dict,
                          headers: dict) -> TransportResponse:
        wait = self.backoff
        for attempt in range(1, self.max_attempts + 1):
            with self._lock:
                self.network_calls += 1
            response = self.transport(url, params, headers)
            if response.status == 200:
                return response
            if response.status not in RETRYABLE:
                raise HttpError(response.status, url)
            if attempt == self.max_attempts:
                if response.status == 429:
                    raise RateLimitedError(f"rate limited at {url} "
                                           f"after {attempt} attempts")
                raise HttpError(response.status, url)
            retry_after = response.headers.get("retry-after")
            pause = float(retry_after) if retry_after else wait
            log.debug("retrying %s in %.1fs (HTTP %d)", url, pause, response.status)
            self.sleeper(pause)
            wait *= 2
    # unreachable: the loop either returns or raises


# ---------------------------------------------------------------------------
# fetch specifications and clients

NPM_DOWNLOADS_API = "https://api.npmjs.org/downloads/range"
GITHUB_API = "https://api.github.com"


@dataclass(frozen=True)
class FetchSpec:
    packages: tuple[str, ...]
    start: dt.date
    end: dt.date
    cache_dir: str | Path = ".relqual-cache"
    downloads_api_base: str = NPM_DOWNLOADS_API
    issues_api_base: str = GITHUB_API
    token: str | None = None
    include_pulls: bool = False
    max_window_days: int = 540   # the registry rejects longer range queries

    def __post_init__(self):
        if not self.packages:
            raise ValueError("need at least one package")
        if self.start > self.end:
            raise ValueError("start must be on or before end")
        if self.max_window_days < 1:
            raise ValueError("max_window_days must be >= 1")


def _windows(start: dt.date, end: dt.date, width: int):
    cursor = start
    while cursor <= end:
        stop = min(cursor + dt.timedelta(days=width - 1), end)
        yield cursor, stop
        cursor = stop + dt.timedelta(days=1)


@dataclass(frozen=True)
class PackageDownloads:
    package: str
    days: tuple[dt.date, ...]
    downloads: np.ndarray
    gaps: tuple[dt.date, ...]   # days the API skipped; flagged, never invented


@dataclass
class FetchResult:
    downloads: dict[str, PackageDownloads] = field(default_factory=dict)
    issues: dict[str, tuple[dt.date, ...]] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return bool(self.errors) and (bool(self.downloads) or bool(self.issues))


def fetch_downloads(spec: FetchSpec, http: CachedHttp,
                    politeness: int = 4) -> FetchResult:
    """Per-day download counts for every package over the range.

    Ranges longer than the endpoint's window limit are chunked and merged;
    a failing package is reported in ``errors`` without sinking the batch.
    """
    result = FetchResult()

    def one(package: str):
        per_day: dict[dt.date, int] = {}
        for lo, hi in _windows(spec.start, spec.end, spec.max_window_days):
            url = (f"{spec.downloads_api_base}/"
                   f"{lo.isoformat()}:{hi.isoformat()}/{quote(package, safe='@/')}")
            response = http.get(url)
            payload = json.loads(response.body)
            for row in payload.get("downloads", []):
                per_day[dt.date.fromisoformat(row["day"])] = int(row["downloads"])
        days = sorted(per_day)
        all_days = [spec.start + dt.timedelta(days=i)
                    for i in range((spec.end - spec.start).days + 1)]
        gaps = tuple(d for d in all_days if d not in per_day)
        if gaps:
            log.warning("%s: %d missing days in download series",
                        package, len(gaps))
        return PackageDownloads(package, tuple(days),
                                np.array([per_day[d] for d in days], dtype=np.int64),
                                gaps)

    with ThreadPoolExecutor(max_workers=politeness) as pool:
        futures = {package: pool.submit(one, package) for package in spec.packages}
    for package, future in futures.items():
        try:
            result.downloads[package] = future.result()
        except (HttpError, RateLimitedError, OfflineCacheMissError) as exc:
            result.errors[package] = str(exc)
    return result


_LINK_NEXT = re.compile(r'<([^>]+)>\s*;\s*rel="next"')


def _next_link(headers: dict[str, str]) -> str | None:
    match = _LINK_NEXT.search(headers.get("link", ""))
    return match.group(1) if match else None


def fetch_issues(spec: FetchSpec, http: CachedHttp,
                 politeness: int = 4) -> FetchResult:
    """Issue creation dates per repository, paginated to exhaustion.

    Open and closed issues both count (resolution speed says little about
    how many problems users hit); pull requests are excluded unless asked
    for.  A page failing mid-stream surfaces as truncated pagination.
    """
    result = FetchResult()

    def one(repo: str):
        headers = {"accept": "application/vnd.github+json"}
        if spec.token:
            headers["authorization"] = f"Bearer {spec.token}"
        url = f"{spec.issues_api_base}/repos/{repo}/issues"
        params = {"state": "all", "per_page": 100, "page": 1}
        dates: list[dt.date] = []
        page = 1
        while True:
            try:
                response = http.get(url, params=params, headers=headers)
            except (HttpError, RateLimitedError) as exc:
                if page == 1:
                    raise
                raise TruncatedPaginationError(
                    f"{repo}: pagination broke at page {page}: {exc}") from exc
            items = json.loads(response.body)
            for item in items:
                if "pull_request" in item and not spec.include_pulls:
                    continue
                created = item["created_at"]
                dates.append(dt.datetime.fromisoformat(
                    created.replace("Z", "+00:00")).date())
            nxt = _next_link(response.headers)
            if not nxt:
                break
            url, params = nxt, None
            page += 1
        return tuple(dates)

    with ThreadPoolExecutor(max_workers=politeness) as pool:
        futures = {repo: pool.submit(one, repo) for repo in spec.packages}
    for repo, future in futures.items():
        try:
            result.issues[repo] = future.result()
        except (HttpError, RateLimitedError, OfflineCacheMissError,
                TruncatedPaginationError) as exc:
            result.errors[repo] = str(exc)
    return result


def build_daily_series(package: str, downloads: PackageDownloads,
                       issue_dates: tuple[dt.date, ...],
                       start: dt.date, end: dt.date) -> DailySeries:
    """Align downloads with a running issue count over [start, end].

    The cumulative count on a day is the number of issues created on or
    before it; days before the first issue sit at zero.
    """
    span = [(start + dt.timedelta(days=i))
            for i in range((end - start).days + 1)]
    by_day = dict(zip(downloads.days, downloads.downloads))
    missing = [d for d in span if d not in by_day]
    if missing:
        raise GapInSeriesError(
            f"{package}: downloads missing for {len(missing)} days "
            f"(first: {missing[0]})")
    sorted_dates = sorted(issue_dates)
    cumulative = np.searchsorted(np.array(sorted_dates, dtype="datetime64[D]"),
                                 np.array(span, dtype="datetime64[D]"),
                                 side="right")
    return DailySeries(package, tuple(span),
                       np.array([by_day[d] for d in span], dtype=np.int64),
                       cumulative.astype(np.int64))


def filter_popular(packages: tuple[str, ...],
                   monthly_downloads: dict[str, float],
                   threshold: float = 10_000.0) -> tuple[str, ...]:
    """Keep packages strictly above the monthly download threshold."""
    return tuple(p for p in packages
                 if monthly_downloads.get(p, 0.0) > threshold)
