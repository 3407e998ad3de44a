import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from llmrefine.clients import (
    GREEDY,
    TOP_K_40,
    HTTPStatusError,
    HttpClient,
    HttpClientConfig,
    MalformedPayloadError,
    MockClient,
    ModelRequest,
    ModelTimeoutError,
    ScriptExhaustedError,
    TransportError,
    client_from_mapping,
)


class Stub:
    """Scripted HTTP endpoint: each entry is (status, body) or ("sleep", seconds)."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.bodies = []
        self.headers = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                raw = self.rfile.read(int(self.headers["Content-Length"]))
                stub.bodies.append(json.loads(raw.decode("utf-8")))
                stub.headers.append(dict(self.headers))
                status, body = stub.replies.pop(0) if len(stub.replies) > 1 else stub.replies[0]
                if status == "sleep":
                    import time

                    time.sleep(body)
                    status, body = 200, {"text": "late"}
                data = body if isinstance(body, bytes) else json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        class Server(ThreadingHTTPServer):
            def handle_error(self, request, client_address):
                pass  # client hung up during the timeout test

        self.server = Server(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}/generate"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def client(url, **kw):
    kw.setdefault("backoff_base", 0.0)
    return HttpClient(HttpClientConfig(url=url, **kw), sleep=lambda s: None)


def test_mock_sequential():
    m = MockClient(script=["hello"])
    assert m.complete(ModelRequest("anything")).text == "hello"
    with pytest.raises(ScriptExhaustedError):
        m.complete(ModelRequest("again"))


def test_mock_keyed():
    m = MockClient(keyed=[("contains errors", ["fix one", "fix two"]), ("quality is", "scored")], default="plain")
    assert m.complete(ModelRequest("Your translation contains errors.")).text == "fix one"
    assert m.complete(ModelRequest("Your translation contains errors.")).text == "fix two"
    assert m.complete(ModelRequest("Translation quality is 80")).text == "scored"
    assert m.complete(ModelRequest("Translation quality is 80")).text == "scored"
    assert m.complete(ModelRequest("other")).text == "plain"
    with pytest.raises(ScriptExhaustedError):
        m.complete(ModelRequest("contains errors"))


def test_mock_is_deterministic():
    prompts = ["a contains errors", "b", "contains errors c", "d"]

    def run():
        m = MockClient(script=["x", "y"], keyed=[("contains errors", ["1", "2"])])
        return [m.complete(ModelRequest(p)).text for p in prompts]

    assert run() == run() == ["1", "x", "2", "y"]


def test_request_ids_unique():
    ids = {ModelRequest("p").request_id for _ in range(100)}
    assert len(ids) == 100


def test_http_returns_text_and_passes_prompt_verbatim():
    prompt = 'Translate "一个餐等了一个半小时。" into English.\n  "quoted"\t{braces} $dollar'
    with Stub([(200, {"text": "A meal took an hour and a half to arrive."})]) as stub:
        resp = client(stub.url, token="sekret").complete(ModelRequest(prompt, TOP_K_40))
    assert resp.text == "A meal took an hour and a half to arrive."
    assert stub.bodies[0]["prompt"] == prompt
    assert stub.bodies[0]["top_k"] == 40 and stub.bodies[0]["temperature"] == 0.8
    assert stub.headers[0]["Authorization"] == "Bearer sekret"
    assert resp.raw_provider_payload == {"text": "A meal took an hour and a half to arrive."}


def test_http_greedy_body():
    with Stub([(200, {"text": "ok"})]) as stub:
        client(stub.url).complete(ModelRequest("p", GREEDY))
    assert stub.bodies[0]["temperature"] == 0.0
    assert "top_k" not in stub.bodies[0]


def test_http_retries_then_succeeds():
    with Stub([(503, {"error": "busy"}), (429, {"error": "slow down"}), (200, {"text": "ok"})]) as stub:
        delays = []
        c = HttpClient(HttpClientConfig(url=stub.url, max_retries=3, backoff_base=0.1, backoff_cap=0.15), sleep=delays.append)
        assert c.complete(ModelRequest("p")).text == "ok"
    assert len(stub.bodies) == 3
    assert delays == [0.1, 0.15]


def test_http_gives_up_after_cap():
    with Stub([(500, {"error": "down"})]) as stub:
        with pytest.raises(HTTPStatusError) as e:
            client(stub.url, max_retries=2).complete(ModelRequest("p"))
    assert e.value.status == 500
    assert len(stub.bodies) == 3


def test_http_client_error_not_retried():
    with Stub([(400, {"error": "bad"})]) as stub:
        with pytest.raises(HTTPStatusError):
            client(stub.url, max_retries=5).complete(ModelRequest("p"))
    assert len(stub.bodies) == 1


@pytest.mark.parametrize("body", [b"not json", {"txt": "wrong key"}, {"text": 3}])
def test_http_malformed(body):
    with Stub([(200, body)]) as stub:
        with pytest.raises(MalformedPayloadError):
            client(stub.url).complete(ModelRequest("p"))


def test_http_timeout():
    with Stub([("sleep", 0.5)]) as stub:
        with pytest.raises(ModelTimeoutError):
            client(stub.url, timeout=0.05, max_retries=0).complete(ModelRequest("p"))


def test_http_transport_error():
    with pytest.raises(TransportError):
        client("http://127.0.0.1:9/none", max_retries=1).complete(ModelRequest("p"))


def test_completions_provider():
    with Stub([(200, {"choices": [{"text": "from choices"}]})]) as stub:
        assert client(stub.url, provider="completions").complete(ModelRequest("p")).text == "from choices"


def test_unknown_provider():
    with pytest.raises(ValueError):
        HttpClient(HttpClientConfig(url="http://x", provider="nope"))


def test_audit_log(tmp_path):
    log = tmp_path / "audit.jsonl"
    with Stub([(200, {"text": "ok"})]) as stub:
        c = client(stub.url, audit_path=str(log))
        c.complete(ModelRequest("p1"))
        c.complete(ModelRequest("p2"))
    recs = [json.loads(l) for l in log.read_text().splitlines()]
    assert [r["prompt"] for r in recs] == ["p1", "p2"]
    assert all(r["text"] == "ok" for r in recs)


def test_config_env_overrides_secret_only(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"url": "http://file", "timeout": 5, "max_retries": 1, "token_env": "MY_TOKEN"}))
    cfg = HttpClientConfig.from_file(path, env={"MY_TOKEN": "abc", "LLMREFINE_API_URL": "http://env"})
    assert (cfg.url, cfg.token, cfg.timeout, cfg.max_retries) == ("http://file", "abc", 5, 1)


def test_client_from_mapping():
    assert isinstance(client_from_mapping({"type": "mock", "script": ["a"]}), MockClient)
    assert isinstance(client_from_mapping({"type": "http", "url": "http://x"}, env={}), HttpClient)
    with pytest.raises(ValueError):
        client_from_mapping({"type": "grpc"})


def test_concurrent_callers_share_client():
    with Stub([(200, {"text": "ok"})]) as stub:
        c = client(stub.url, max_concurrency=2)
        out = []
        threads = [threading.Thread(target=lambda: out.append(c.complete(ModelRequest("p")).text)) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    assert out == ["ok"] * 8
