from __future__ import annotations

import hashlib
import io
import os
import zipfile

import pytest

from bineq.errors import ChecksumMismatch, MetadataParseError, NetworkError, NoMatch, NotFound
from bineq.repo import (
    CACHE_ENV, USER_AGENT, Coordinates, RepoClient, RepoSpec, artifact_url, default_cache_root,
    parse_metadata, select_version,
)

METADATA = b"""<?xml version="1.0" encoding="UTF-8"?>
<metadata>
  <groupId>org.example</groupId>
  <artifactId>lib</artifactId>
  <versioning>
    <versions>
      <version>1.0</version>
      <version>1.0-redhat-1</version>
      <version>1.0.redhat-00002</version>
    </versions>
  </versioning>
</metadata>
"""


def small_jar(text: bytes = b"hello") -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as z:
        z.writestr("a.txt", text)
    return buf.getvalue()


def client(tmp_path, **kw) -> RepoClient:
    return RepoClient(cache_root=str(tmp_path / "cache"), backoff=0.01, **kw)


def test_artifact_url_layout():
    repo = RepoSpec("central", "https://repo.example/maven2/")
    c = Coordinates("commons-io", "commons-io", "2.15.1")
    assert artifact_url(repo, c) == \
        "https://repo.example/maven2/commons-io/commons-io/2.15.1/commons-io-2.15.1.jar"
    src = Coordinates("commons-io", "commons-io", "2.15.1", "sources")
    assert artifact_url(repo, src).endswith("/commons-io-2.15.1-sources.jar")
    deep = Coordinates("com.fasterxml.jackson.core", "jackson-core", "2.17.2")
    assert "/com/fasterxml/jackson/core/jackson-core/" in artifact_url(repo, deep)


def test_coordinates_validation():
    assert Coordinates.parse("g:a:1.0:sources").classifier == "sources"
    for bad in ("g:a", "g/x:a:1", "g:a:..", "g::1"):
        with pytest.raises(ValueError):
            Coordinates.parse(bad)


def test_metadata_order_preserved():
    assert parse_metadata(METADATA) == ["1.0", "1.0-redhat-1", "1.0.redhat-00002"]


def test_metadata_errors():
    with pytest.raises(MetadataParseError):
        parse_metadata(b"<metadata><versioning>")
    with pytest.raises(MetadataParseError):
        parse_metadata(b"<project/>")


def test_select_version():
    vl = ["1.0-redhat-1", "1.0.redhat-00002"]
    assert select_version(vl, "1.0", "first") == "1.0-redhat-1"
    assert select_version(vl, "1.0", "last") == "1.0.redhat-00002"
    with pytest.raises(NoMatch):
        select_version(["2.0"], "1.0", "first")


def test_fetch_versions_over_http(tmp_path, maven_server):
    maven_server.put("org/example/lib/maven-metadata.xml", METADATA)
    repo = RepoSpec("fixture", maven_server.url)
    assert client(tmp_path).fetch_versions(repo, "org.example", "lib") == \
        ["1.0", "1.0-redhat-1", "1.0.redhat-00002"]
    assert maven_server.agents[-1] == USER_AGENT
    with pytest.raises(NotFound):
        client(tmp_path).fetch_versions(repo, "org.example", "missing")


def test_fetch_with_md5_is_cached(tmp_path, maven_server):
    body = small_jar()
    maven_server.put("org/example/lib/1.0/lib-1.0.jar", body)
    maven_server.put("org/example/lib/1.0/lib-1.0.jar.md5", hashlib.md5(body).hexdigest().encode() + b"  \n")
    repo = RepoSpec("fixture", maven_server.url)
    c = Coordinates("org.example", "lib", "1.0")
    cl = client(tmp_path)
    first = cl.fetch_artifact(repo, c)
    assert first.checksum == "md5" and not first.from_cache and first.warning is None
    with open(first.path, "rb") as fh:
        assert fh.read() == body
    assert first.path == os.path.join(str(tmp_path / "cache"), "fixture", "org.example", "lib", "1.0",
                                      "lib-1.0.jar")
    before = len(maven_server.requests)
    second = client(tmp_path).fetch_artifact(repo, c)
    assert len(maven_server.requests) == before
    assert second.from_cache and second.path == first.path


def test_checksum_mismatch_caches_nothing(tmp_path, maven_server):
    body = small_jar()
    maven_server.put("org/example/lib/1.0/lib-1.0.jar", body)
    maven_server.put("org/example/lib/1.0/lib-1.0.jar.md5", b"0" * 32)
    repo = RepoSpec("fixture", maven_server.url)
    cl = client(tmp_path)
    with pytest.raises(ChecksumMismatch):
        cl.fetch_artifact(repo, Coordinates("org.example", "lib", "1.0"))
    assert not os.path.exists(cl.cache_dir(repo, Coordinates("org.example", "lib", "1.0")))


def test_sha1_fallback_and_missing_sidecar(tmp_path, maven_server):
    body = small_jar()
    repo = RepoSpec("fixture", maven_server.url)
    maven_server.put("g/a/1/a-1.jar", body)
    maven_server.put("g/a/1/a-1.jar.sha1", hashlib.sha1(body).hexdigest().upper().encode())
    got = client(tmp_path).fetch_artifact(repo, Coordinates("g", "a", "1"))
    assert got.checksum == "sha1" and got.warning is None
    maven_server.put("g/a/2/a-2.jar", body)
    got = client(tmp_path).fetch_artifact(repo, Coordinates("g", "a", "2"))
    assert got.checksum is None and "sidecar" in got.warning
    again = client(tmp_path).fetch_artifact(repo, Coordinates("g", "a", "2"))
    assert again.from_cache and again.warning == got.warning


def test_missing_artifact(tmp_path, maven_server):
    with pytest.raises(NotFound):
        client(tmp_path).fetch_artifact(RepoSpec("fixture", maven_server.url),
                                        Coordinates("g", "a", "9"))


def test_server_errors_are_retried_then_surface(tmp_path, maven_server):
    maven_server.put("g/a/1/a-1.jar", small_jar())
    maven_server.status["/repo/g/a/1/a-1.jar"] = 503
    with pytest.raises(NetworkError):
        client(tmp_path, retries=2).fetch_artifact(RepoSpec("fixture", maven_server.url),
                                                   Coordinates("g", "a", "1"))
    assert maven_server.requests.count("/repo/g/a/1/a-1.jar") == 3


def test_unextractable_jar_rejected(tmp_path, maven_server):
    from bineq.errors import ArchiveUnreadable

    maven_server.put("g/a/1/a-1.jar", b"not a zip")
    with pytest.raises(ArchiveUnreadable):
        client(tmp_path).fetch_artifact(RepoSpec("fixture", maven_server.url), Coordinates("g", "a", "1"))


def test_cache_root_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    assert default_cache_root() == str(tmp_path)
    assert RepoClient().cache_root == str(tmp_path)
