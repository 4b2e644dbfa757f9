"""Live TCP and WebSocket servers."""

import base64
import hashlib
import socket
import struct
import threading

import pytest

from edgecep.node import Node
from edgecep.server import (
    TcpLineServer, WebServer, ws_accept_key, ws_encode, ws_read_frame,
)


@pytest.fixture
def live_node(tmp_path):
    node = Node(workdir=tmp_path)
    tcp = TcpLineServer(node, port=0)
    thread = threading.Thread(target=tcp.serve_forever, daemon=True)
    thread.start()
    yield node, tcp
    tcp.shutdown()
    tcp.server_close()


class LineClient:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port),
                                             timeout=5)
        self.buf = b""

    def send(self, line: str):
        self.sock.sendall(line.encode() + b"\n")

    def recv_line(self) -> str:
        while b"\n" not in self.buf:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ConnectionError("eof")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line.decode()

    def ask(self, line: str) -> str:
        self.send(line)
        return self.recv_line()

    def close(self):
        self.sock.close()


def test_ping_pong_over_tcp(live_node):
    _, tcp = live_node
    c = LineClient(tcp.port)
    assert c.ask("PING") == "PONG"
    c.close()


def test_rule_event_emit_over_tcp(live_node):
    _, tcp = live_node
    c = LineClient(tcp.port)
    assert c.ask("RULE f h[_,_](X) :- e[_,_](X)") == "OK f"
    assert c.ask("SUB *") == "OK *"
    c.send("EVENT e[1, 1](9)")
    assert c.recv_line() == "OK"
    assert c.recv_line() == "EMIT h[1, 1](9)"
    c.close()


def test_two_clients_isolated(live_node):
    _, tcp = live_node
    a, b = LineClient(tcp.port), LineClient(tcp.port)
    a.ask("RULE f h[_,_](X) :- e[_,_](X)")
    b.ask("SUB h")
    a.send("EVENT e[2, 2](5)")
    assert a.recv_line() == "OK"        # no EMIT for a
    assert b.recv_line() == "EMIT h[2, 2](5)"
    a.close()
    b.close()


def test_oversized_line_gets_single_error(live_node):
    _, tcp = live_node
    c = LineClient(tcp.port)
    c.send("EVENT " + "y" * 20000)
    assert c.recv_line().startswith("ERR too-long")
    assert c.ask("PING") == "PONG"      # stream resynchronized
    c.close()


# -- websocket --

def test_accept_key_rfc_example():
    # the handshake example key from the protocol spec
    assert ws_accept_key("dGhlIHNhbXBsZSBub25jZQ==") == \
        "s3pPLMBiTxaQ9kYGzzhZRbK+xOo="


def test_frame_roundtrip_masked():
    payload = "EVENT tick[0, 0]()".encode()
    mask = b"\x12\x34\x56\x78"
    frame = bytes([0x81, 0x80 | len(payload)]) + mask + bytes(
        b ^ mask[i % 4] for i, b in enumerate(payload))

    import io
    opcode, got = ws_read_frame(io.BytesIO(frame))
    assert opcode == 0x1 and got == payload


def _ws_handshake(sock, port):
    key = base64.b64encode(b"0123456789abcdef").decode()
    sock.sendall(
        f"GET /ws HTTP/1.1\r\nHost: 127.0.0.1:{port}\r\n"
        f"Upgrade: websocket\r\nConnection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        f"Sec-WebSocket-Version: 13\r\n\r\n".encode())
    head = b""
    while b"\r\n\r\n" not in head:
        head += sock.recv(4096)
    assert b"101" in head.split(b"\r\n", 1)[0]
    assert ws_accept_key(key).encode() in head
    return head.split(b"\r\n\r\n", 1)[1]


def _ws_send_text(sock, text: str):
    payload = text.encode()
    mask = b"\xaa\xbb\xcc\xdd"
    frame = bytes([0x81])
    n = len(payload)
    assert n < 126
    frame += bytes([0x80 | n]) + mask
    frame += bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    sock.sendall(frame)


def _ws_recv_text(sock, leftover=b""):
    buf = leftover
    while True:
        if len(buf) >= 2:
            length = buf[1] & 0x7F
            if len(buf) >= 2 + length:
                frame, rest = buf[:2 + length], buf[2 + length:]
                assert frame[0] == 0x81
                return frame[2:2 + length].decode(), rest
        chunk = sock.recv(4096)
        if not chunk:
            raise ConnectionError("eof")
        buf += chunk


def test_websocket_carries_wire_protocol(tmp_path):
    node = Node(workdir=tmp_path)
    web = WebServer(node, assets_dir=None, port=0)
    thread = threading.Thread(target=web.serve_forever, daemon=True)
    thread.start()
    try:
        sock = socket.create_connection(("127.0.0.1", web.port),
                                        timeout=5)
        leftover = _ws_handshake(sock, web.port)
        _ws_send_text(sock, "PING")
        text, leftover = _ws_recv_text(sock, leftover)
        assert text == "PONG"
        _ws_send_text(sock, "RULE f h[_,_](X) :- e[_,_](X)")
        text, leftover = _ws_recv_text(sock, leftover)
        assert text == "OK f"
        _ws_send_text(sock, "SUB *")
        text, leftover = _ws_recv_text(sock, leftover)
        assert text == "OK *"
        _ws_send_text(sock, "EVENT e[3, 3](1)")
        text, leftover = _ws_recv_text(sock, leftover)
        assert text == "OK"
        text, leftover = _ws_recv_text(sock, leftover)
        assert text == "EMIT h[3, 3](1)"
        sock.close()
    finally:
        web.shutdown()
        web.server_close()


def test_static_assets_served(tmp_path):
    assets = tmp_path / "web"
    assets.mkdir()
    (assets / "index.html").write_text("<html>console</html>")
    node = Node(workdir=tmp_path)
    web = WebServer(node, assets_dir=assets, port=0)
    thread = threading.Thread(target=web.serve_forever, daemon=True)
    thread.start()
    try:
        import urllib.request
        with urllib.request.urlopen(
                f"http://127.0.0.1:{web.port}/", timeout=5) as resp:
            assert b"console" in resp.read()
        with pytest.raises(urllib.error.HTTPError):
            urllib.request.urlopen(
                f"http://127.0.0.1:{web.port}/../secret", timeout=5)
    finally:
        web.shutdown()
        web.server_close()
