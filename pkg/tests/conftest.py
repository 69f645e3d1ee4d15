from __future__ import annotations

import os
import zipfile

import pytest

DATA = os.path.join(os.path.dirname(__file__), "data")
CORPUS_JAR = os.path.join(DATA, "corpus.jar")


def load_corpus() -> list[tuple[str, bytes]]:
    with zipfile.ZipFile(CORPUS_JAR) as z:
        return [(i.filename, z.read(i)) for i in z.infolist() if i.filename.endswith(".class")]


@pytest.fixture(scope="session")
def corpus() -> list[tuple[str, bytes]]:
    return load_corpus()


@pytest.fixture(scope="session")
def corpus_bytes(corpus) -> dict[str, bytes]:
    return dict(corpus)


class MavenServer:
    """A local HTTP server serving ``files`` and recording every request path."""

    def __init__(self):
        import http.server
        import threading

        self.files: dict[str, bytes] = {}
        self.status: dict[str, int] = {}  # path -> forced status code
        self.requests: list[str] = []
        self.agents: list[str] = []
        server = self

        class Handler(http.server.BaseHTTPRequestHandler):
            def do_GET(self):
                server.requests.append(self.path)
                server.agents.append(self.headers.get("User-Agent", ""))
                code = server.status.get(self.path)
                if code is None and self.path not in server.files:
                    code = 404
                if code is not None:
                    self.send_response(code)
                    self.send_header("Content-Length", "0")
                    self.end_headers()
                    return
                body = server.files[self.path]
                self.send_response(200)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def log_message(self, *args):
                pass

        self.httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/repo"

    def put(self, path: str, body: bytes) -> None:
        self.files["/repo/" + path.lstrip("/")] = body

    def close(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def maven_server():
    server = MavenServer()
    yield server
    server.close()
