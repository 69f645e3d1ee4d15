"""Fetching artifacts from Maven-layout repositories over HTTP.

Downloads are verified against ``.md5`` sidecars (``.sha1`` as fallback)
and cached under ``<root>/<repo-id>/<group>/<artifact>/<version>/``.  A
cached file is never fetched or rewritten again.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from . import __version__
from .archive import read_archive_bytes
from .engine import canonicalize_version
from .errors import (
    ChecksumMismatch, MetadataParseError, NetworkError, NoMatch, NotFound,
)

log = logging.getLogger(__name__)

USER_AGENT = f"bineq/{__version__} (+binary equivalence checker)"
CACHE_ENV = "BINEQ_CACHE"
_BAD_PART = re.compile(r"[/\\]|^\.\.?$|^$")


@dataclass(frozen=True)
class Coordinates:
    group: str
    artifact: str
    version: str
    classifier: str | None = None

    def __post_init__(self):
        for part in (self.group, self.artifact, self.version, self.classifier or "x"):
            if _BAD_PART.search(part):
                raise ValueError(f"invalid coordinate component {part!r}")

    @classmethod
    def parse(cls, gav: str, classifier: str | None = None) -> "Coordinates":
        """Parse ``group:artifact:version[:classifier]``."""
        parts = gav.split(":")
        if len(parts) not in (3, 4):
            raise ValueError(f"expected group:artifact:version, got {gav!r}")
        if len(parts) == 4:
            classifier = parts[3]
        return cls(parts[0], parts[1], parts[2], classifier)

    @property
    def file_name(self) -> str:
        suffix = f"-{self.classifier}" if self.classifier else ""
        return f"{self.artifact}-{self.version}{suffix}.jar"

    def __str__(self) -> str:
        out = f"{self.group}:{self.artifact}:{self.version}"
        return f"{out}:{self.classifier}" if self.classifier else out


@dataclass(frozen=True)
class RepoSpec:
    id: str
    base_url: str
    provider: str = ""

    def __post_init__(self):
        object.__setattr__(self, "base_url", self.base_url.rstrip("/"))
        if _BAD_PART.search(self.id):
            raise ValueError(f"invalid repository id {self.id!r}")

    @classmethod
    def from_url(cls, url: str, provider: str = "") -> "RepoSpec":
        """A repository whose id is derived from the host and path of ``url``."""
        u = urllib.parse.urlsplit(url.rstrip("/"))
        ident = re.sub(r"[^A-Za-z0-9._-]+", "_", f"{u.netloc}{u.path}").strip("_") or "repo"
        return cls(ident, url, provider)


def artifact_url(repo: RepoSpec, c: Coordinates) -> str:
    return "/".join([repo.base_url, *c.group.split("."), c.artifact, c.version, c.file_name])


def metadata_url(repo: RepoSpec, group: str, artifact: str) -> str:
    return "/".join([repo.base_url, *group.split("."), artifact, "maven-metadata.xml"])


def parse_metadata(data: bytes) -> list[str]:
    """Versions listed in a ``maven-metadata.xml`` document, in document order."""
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MetadataParseError(f"malformed metadata: {exc}") from exc
    if root.tag.rpartition("}")[2] != "metadata":
        raise MetadataParseError(f"unexpected root element {root.tag!r}")
    versions = root.find("versioning/versions")
    if versions is None:
        return []
    return [v.text.strip() for v in versions.findall("version") if v.text and v.text.strip()]


def select_version(versions: list[str], canonical: str, strategy: str = "first",
                   tags=("redhat",)) -> str:
    """First or last version (in release order) canonicalizing to ``canonical``."""
    if strategy not in ("first", "last"):
        raise ValueError(f"strategy must be first or last, not {strategy!r}")
    matches = [v for v in versions if canonicalize_version(v, tags) == canonical]
    if not matches:
        raise NoMatch(f"no version canonicalizes to {canonical!r}")
    return matches[0] if strategy == "first" else matches[-1]


def default_cache_root() -> str:
    return os.environ.get(CACHE_ENV) or os.path.join(os.path.expanduser("~"), ".cache", "bineq")


@dataclass(frozen=True)
class CachedArtifact:
    path: str
    coordinates: Coordinates
    repo_id: str
    checksum: str | None  # "md5", "sha1", or None when no sidecar existed
    warning: str | None = None
    from_cache: bool = False


def _sidecar_digest(text: bytes) -> str:
    parts = text.decode("ascii", "replace").split()
    if not parts:
        raise ChecksumMismatch("empty checksum sidecar")
    return parts[0].lower()


class RepoClient:
    """HTTP access with retries, per-host concurrency limits and caching."""

    def __init__(self, cache_root: str | None = None, retries: int = 3, backoff: float = 0.5,
                 per_host: int = 4, delay: float = 0.0, timeout: float = 30.0):
        self.cache_root = cache_root or default_cache_root()
        self.retries = retries
        self.backoff = backoff
        self.per_host = per_host
        self.delay = delay
        self.timeout = timeout
        self._lock = threading.Lock()
        self._hosts: dict[str, threading.BoundedSemaphore] = {}
        self._last: dict[str, float] = {}

    def _slot(self, host: str) -> threading.BoundedSemaphore:
        with self._lock:
            if host not in self._hosts:
                self._hosts[host] = threading.BoundedSemaphore(self.per_host)
            return self._hosts[host]

    def _polite(self, host: str) -> None:
        if self.delay <= 0:
            return
        with self._lock:
            wait = self._last.get(host, 0.0) + self.delay - time.monotonic()
            self._last[host] = time.monotonic() + max(wait, 0.0)
        if wait > 0:
            time.sleep(wait)

    def get(self, url: str) -> bytes:
        """GET ``url``; 404 raises NotFound, transient failures are retried."""
        host = urllib.parse.urlsplit(url).netloc
        req = urllib.request.Request(url, headers={"User-Agent": USER_AGENT})
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            with self._slot(host):
                self._polite(host)
                try:
                    with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                        return resp.read()
                except urllib.error.HTTPError as exc:
                    if exc.code in (404, 410):
                        raise NotFound(f"{url}: HTTP {exc.code}") from exc
                    if exc.code < 500 and exc.code != 429:
                        raise NetworkError(f"{url}: HTTP {exc.code}") from exc
                    last = exc
                except (urllib.error.URLError, OSError) as exc:
                    last = exc
            log.info("attempt %d for %s failed: %s", attempt + 1, url, last)
        raise NetworkError(f"{url}: {last}")

    def fetch_versions(self, repo: RepoSpec, group: str, artifact: str) -> list[str]:
        return parse_metadata(self.get(metadata_url(repo, group, artifact)))

    def cache_dir(self, repo: RepoSpec, c: Coordinates) -> str:
        return os.path.join(self.cache_root, repo.id, c.group, c.artifact, c.version)

    def fetch_artifact(self, repo: RepoSpec, c: Coordinates) -> CachedArtifact:
        directory = self.cache_dir(repo, c)
        target = os.path.join(directory, c.file_name)
        meta_path = target + ".meta.json"
        if os.path.exists(target) and os.path.exists(meta_path):
            with open(meta_path, encoding="utf-8") as fh:
                meta = json.load(fh)
            return CachedArtifact(target, c, repo.id, meta.get("checksum"), meta.get("warning"), True)

        url = artifact_url(repo, c)
        data = self.get(url)
        checksum, warning = None, None
        for kind in ("md5", "sha1"):
            try:
                expected = _sidecar_digest(self.get(f"{url}.{kind}"))
            except NotFound:
                continue
            actual = hashlib.new(kind, data).hexdigest()
            if actual != expected:
                raise ChecksumMismatch(f"{url}: {kind} is {actual}, sidecar says {expected}")
            checksum = kind
            break
        else:
            warning = "no md5 or sha1 sidecar; download not verified"
            log.warning("%s: %s", url, warning)
        read_archive_bytes(data, url)  # an unextractable jar is rejected, not cached
        os.makedirs(directory, exist_ok=True)
        _atomic_write(target, data)
        _atomic_write(meta_path, json.dumps(
            {"url": url, "checksum": checksum, "warning": warning,
             "sha256": hashlib.sha256(data).hexdigest()}, indent=1).encode())
        return CachedArtifact(target, c, repo.id, checksum, warning, False)


def _atomic_write(path: str, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), prefix=".part-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fetch_versions(repo: RepoSpec, group: str, artifact: str,
                   client: RepoClient | None = None) -> list[str]:
    return (client or RepoClient()).fetch_versions(repo, group, artifact)


def fetch_artifact(repo: RepoSpec, c: Coordinates, client: RepoClient | None = None) -> CachedArtifact:
    return (client or RepoClient()).fetch_artifact(repo, c)
