import datetime as dt
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relqual.ingest import (
    CachedHttp,
    FetchSpec,
    GapInSeriesError,
    HttpCache,
    HttpError,
    OfflineCacheMissError,
    ParseError,
    RateLimitedError,
    SchemaMismatchError,
    TransportResponse,
    build_daily_series,
    fetch_downloads,
    fetch_issues,
    filter_popular,
    load_usage_csv,
    write_usage_csv,
)
from relqual.quality import UsageRecord

START = dt.date(2018, 1, 1)


class FixtureTransport:
    """Recorded responses keyed by (url, params); counts live hits."""

    def __init__(self, fixtures):
        self.fixtures = fixtures
        self.calls = 0

    def __call__(self, url, params, headers):
        self.calls += 1
        key = (url, json.dumps(params or {}, sort_keys=True))
        if key not in self.fixtures:
            return TransportResponse(404, {}, b"{}")
        value = self.fixtures[key]
        if isinstance(value, TransportResponse):
            return value
        return TransportResponse(200, value[0], json.dumps(value[1]).encode())


def downloads_fixture(package, start, days, base="https://api.npmjs.org/downloads/range"):
    end = start + dt.timedelta(days=days - 1)
    payload = {"downloads": [
        {"day": (start + dt.timedelta(days=i)).isoformat(), "downloads": 100 + i}
        for i in range(days)
    ]}
    url = f"{base}/{start.isoformat()}:{end.isoformat()}/{package}"
    return url, payload


# --- usage CSV -------------------------------------------------------------


def test_usage_csv_round_trip(tmp_path):
    records = [
        UsageRecord(START, "1.0", 5, 5, 10, 12, 300.5, 2),
        UsageRecord(START + dt.timedelta(days=1), "1.0", 0, 4, 3, 3, 120.0, 0),
    ]
    path = tmp_path / "usage.csv"
    write_usage_csv(path, records)
    assert load_usage_csv(path) == records


def test_usage_csv_empty_body(tmp_path):
    path = tmp_path / "usage.csv"
    path.write_text("date,release,new_users,users,new_visits,visits,time_on_site,exceptions\n")
    assert load_usage_csv(path) == []


def test_usage_csv_rejects_negative_counts(tmp_path):
    path = tmp_path / "usage.csv"
    path.write_text(
        "date,release,new_users,users,new_visits,visits,time_on_site,exceptions\n"
        "2018-01-01,1.0,5,-1,0,0,10,0\n")
    with pytest.raises(ParseError) as err:
        load_usage_csv(path)
    assert err.value.line == 2


def test_usage_csv_header_mismatch(tmp_path):
    path = tmp_path / "usage.csv"
    path.write_text("date,release,users\n")
    with pytest.raises(SchemaMismatchError):
        load_usage_csv(path)


# --- cache and transport ----------------------------------------------------


def test_warm_cache_replays_without_network(tmp_path):
    url, payload = downloads_fixture("left-pad", START, 31)
    transport = FixtureTransport({(url, "{}"): ({}, payload)})
    spec = FetchSpec(("left-pad",), START, START + dt.timedelta(days=30),
                     cache_dir=tmp_path)

    http = CachedHttp(HttpCache(tmp_path), transport)
    first = fetch_downloads(spec, http)
    assert first.downloads["left-pad"].downloads.shape == (31,)
    assert transport.calls == 1

    # fresh client, same cache dir, no transport at all
    offline = CachedHttp(HttpCache(tmp_path), transport=None)
    second = fetch_downloads(spec, offline)
    assert offline.network_calls == 0
    assert np.array_equal(second.downloads["left-pad"].downloads,
                          first.downloads["left-pad"].downloads)
    assert second.downloads["left-pad"].days == first.downloads["left-pad"].days


def test_cold_cache_offline_raises_with_instruction(tmp_path):
    http = CachedHttp(HttpCache(tmp_path), transport=None)
    with pytest.raises(OfflineCacheMissError, match="live"):
        http.get("https://api.npmjs.org/downloads/range/x:y/pkg")


def test_chunked_fetch_equals_whole_range(tmp_path):
    days = 20
    end = START + dt.timedelta(days=days - 1)
    url_whole, payload = downloads_fixture("pkg", START, days)
    # the same series split at day 12
    split = START + dt.timedelta(days=11)
    rows = payload["downloads"]
    url_a = f"https://api.npmjs.org/downloads/range/{START}:{split}/pkg"
    url_b = f"https://api.npmjs.org/downloads/range/{split + dt.timedelta(days=1)}:{end}/pkg"
    fixtures = {
        (url_whole, "{}"): ({}, payload),
        (url_a, "{}"): ({}, {"downloads": rows[:12]}),
        (url_b, "{}"): ({}, {"downloads": rows[12:]}),
    }
    whole = fetch_downloads(
        FetchSpec(("pkg",), START, end, cache_dir=tmp_path / "a"),
        CachedHttp(HttpCache(tmp_path / "a"), FixtureTransport(fixtures)))
    chunked = fetch_downloads(
        FetchSpec(("pkg",), START, end, cache_dir=tmp_path / "b",
                  max_window_days=12),
        CachedHttp(HttpCache(tmp_path / "b"), FixtureTransport(fixtures)))
    assert whole.downloads["pkg"].days == chunked.downloads["pkg"].days
    assert np.array_equal(whole.downloads["pkg"].downloads,
                          chunked.downloads["pkg"].downloads)
    assert whole.downloads["pkg"].gaps == chunked.downloads["pkg"].gaps == ()


def test_unknown_package_surfaces_per_package(tmp_path):
    url, payload = downloads_fixture("good", START, 3)
    transport = FixtureTransport({(url, "{}"): ({}, payload)})
    spec = FetchSpec(("good", "missing"), START, START + dt.timedelta(days=2),
                     cache_dir=tmp_path)
    result = fetch_downloads(spec, CachedHttp(HttpCache(tmp_path), transport))
    assert "good" in result.downloads
    assert "missing" in result.errors and "404" in result.errors["missing"]
    assert result.partial


def test_gap_in_downloads_flagged_not_invented(tmp_path):
    end = START + dt.timedelta(days=4)
    url = f"https://api.npmjs.org/downloads/range/{START}:{end}/pkg"
    rows = [{"day": (START + dt.timedelta(days=i)).isoformat(), "downloads": 5}
            for i in (0, 1, 3, 4)]  # day 2 missing
    transport = FixtureTransport({(url, "{}"): ({}, {"downloads": rows})})
    result = fetch_downloads(FetchSpec(("pkg",), START, end, cache_dir=tmp_path),
                             CachedHttp(HttpCache(tmp_path), transport))
    pkg = result.downloads["pkg"]
    assert pkg.gaps == (START + dt.timedelta(days=2),)
    assert pkg.downloads.shape == (4,)


def test_rate_limit_honors_retry_after_then_succeeds(tmp_path):
    url = "https://api.npmjs.org/downloads/range/2018-01-01:2018-01-01/pkg"
    payload = {"downloads": [{"day": "2018-01-01", "downloads": 7}]}
    responses = [TransportResponse(429, {"retry-after": "3"}, b""),
                 TransportResponse(200, {}, json.dumps(payload).encode())]
    calls = {"i": 0}

    def transport(u, params, headers):
        response = responses[min(calls["i"], 1)]
        calls["i"] += 1
        return response

    naps = []
    http = CachedHttp(HttpCache(tmp_path), transport, sleeper=naps.append)
    body = http.get(url)
    assert json.loads(body.body) == payload
    assert naps == [3.0]


def test_rate_limit_exhaustion_raises(tmp_path):
    def transport(u, params, headers):
        return TransportResponse(429, {}, b"")

    naps = []
    http = CachedHttp(HttpCache(tmp_path), transport, max_attempts=3,
                      sleeper=naps.append)
    with pytest.raises(RateLimitedError):
        http.get("https://api.example/x")
    assert len(naps) == 2  # no sleep after the final attempt
    assert naps[1] > naps[0]  # exponential backoff


def test_hard_http_error_not_retried(tmp_path):
    transport = FixtureTransport({})
    http = CachedHttp(HttpCache(tmp_path), transport)
    with pytest.raises(HttpError):
        http.get("https://api.example/missing")
    assert transport.calls == 1


# --- issues -----------------------------------------------------------------


def issue_items(n, start_day, pulls=0):
    items = []
    for i in range(n):
        item = {"created_at": (start_day + dt.timedelta(days=i % 30)).isoformat()
                + "T10:00:00Z", "number": i}
        items.append(item)
    for i in range(pulls):
        items.append({"created_at": start_day.isoformat() + "T11:00:00Z",
                      "pull_request": {"url": "x"}, "number": 1000 + i})
    return items


def test_issue_pagination_three_pages(tmp_path):
    base = "https://api.github.com/repos/o/r/issues"
    page2 = base + "?page=2"
    page3 = base + "?page=3"
    fixtures = {
        (base, json.dumps({"page": 1, "per_page": 100, "state": "all"}, sort_keys=True)):
            ({"link": f'<{page2}>; rel="next"'}, issue_items(100, START)),
        (page2, "{}"): ({"link": f'<{page3}>; rel="next"'}, issue_items(100, START)),
        (page3, "{}"): ({}, issue_items(37, START)),
    }
    spec = FetchSpec(("o/r",), START, START + dt.timedelta(days=30),
                     cache_dir=tmp_path)
    result = fetch_issues(spec, CachedHttp(HttpCache(tmp_path),
                                           FixtureTransport(fixtures)))
    assert len(result.issues["o/r"]) == 237


def test_issue_pull_requests_excluded_by_default(tmp_path):
    base = "https://api.github.com/repos/o/r/issues"
    fixtures = {
        (base, json.dumps({"page": 1, "per_page": 100, "state": "all"}, sort_keys=True)):
            ({}, issue_items(5, START, pulls=3)),
    }
    spec = FetchSpec(("o/r",), START, START + dt.timedelta(days=5),
                     cache_dir=tmp_path)
    result = fetch_issues(spec, CachedHttp(HttpCache(tmp_path),
                                           FixtureTransport(fixtures)))
    assert len(result.issues["o/r"]) == 5

    spec_pulls = FetchSpec(("o/r",), START, START + dt.timedelta(days=5),
                           cache_dir=tmp_path / "p", include_pulls=True)
    result_pulls = fetch_issues(spec_pulls,
                                CachedHttp(HttpCache(tmp_path / "p"),
                                           FixtureTransport(fixtures)))
    assert len(result_pulls.issues["o/r"]) == 8


def test_issue_zero_issue_repo(tmp_path):
    base = "https://api.github.com/repos/o/empty/issues"
    fixtures = {
        (base, json.dumps({"page": 1, "per_page": 100, "state": "all"}, sort_keys=True)):
            ({}, []),
    }
    spec = FetchSpec(("o/empty",), START, START + dt.timedelta(days=5),
                     cache_dir=tmp_path)
    result = fetch_issues(spec, CachedHttp(HttpCache(tmp_path),
                                           FixtureTransport(fixtures)))
    assert result.issues["o/empty"] == ()


def test_issue_truncated_pagination_detected(tmp_path):
    base = "https://api.github.com/repos/o/r/issues"
    page2 = base + "?page=2"
    fixtures = {
        (base, json.dumps({"page": 1, "per_page": 100, "state": "all"}, sort_keys=True)):
            ({"link": f'<{page2}>; rel="next"'}, issue_items(100, START)),
        # page2 missing -> fixture transport answers 404
    }
    spec = FetchSpec(("o/r",), START, START + dt.timedelta(days=5),
                     cache_dir=tmp_path)
    result = fetch_issues(spec, CachedHttp(HttpCache(tmp_path),
                                           FixtureTransport(fixtures)))
    assert "o/r" in result.errors
    assert "page 2" in result.errors["o/r"]


# --- series building ---------------------------------------------------------


def constant_downloads(days):
    return [(START + dt.timedelta(days=i)) for i in range(days)]


def test_build_daily_series_counting_example():
    from relqual.ingest import PackageDownloads

    days = constant_downloads(6)
    downloads = PackageDownloads("p", tuple(days),
                                 np.full(6, 10, dtype=np.int64), ())
    issue_dates = (days[1], days[1], days[4])
    series = build_daily_series("p", downloads, issue_dates, days[0], days[-1])
    assert series.cumulative_issues.tolist() == [0, 2, 2, 2, 3, 3]


def test_build_daily_series_no_issues_all_zero():
    from relqual.ingest import PackageDownloads

    days = constant_downloads(4)
    downloads = PackageDownloads("p", tuple(days),
                                 np.arange(4, dtype=np.int64), ())
    series = build_daily_series("p", downloads, (), days[0], days[-1])
    assert series.cumulative_issues.tolist() == [0, 0, 0, 0]


def test_build_daily_series_requires_coverage():
    from relqual.ingest import PackageDownloads

    days = constant_downloads(4)
    downloads = PackageDownloads("p", tuple(days[:3]),
                                 np.arange(3, dtype=np.int64), (days[3],))
    with pytest.raises(GapInSeriesError):
        build_daily_series("p", downloads, (), days[0], days[-1])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-5, 20), max_size=40), st.integers(5, 30))
def test_build_daily_series_matches_filter_oracle(offsets, days):
    from relqual.ingest import PackageDownloads

    span = constant_downloads(days)
    downloads = PackageDownloads("p", tuple(span),
                                 np.full(days, 1, dtype=np.int64), ())
    issue_dates = tuple(START + dt.timedelta(days=o) for o in offsets)
    series = build_daily_series("p", downloads, issue_dates, span[0], span[-1])
    for i, day in enumerate(span):
        assert series.cumulative_issues[i] == sum(1 for d in issue_dates if d <= day)


def test_filter_popular_strict_threshold():
    downloads = {"a": 10_001.0, "b": 10_000.0, "c": 500.0}
    assert filter_popular(("a", "b", "c"), downloads) == ("a",)
    assert filter_popular((), downloads) == ()
    assert filter_popular(("a", "b"), downloads, threshold=9_999.0) == ("a", "b")
