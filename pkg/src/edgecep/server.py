"""Network front ends for a node: a plain TCP line server and an
optional HTTP server that upgrades /ws connections to WebSocket
(carrying the identical line protocol) and serves the console's static
assets.

The WebSocket side implements the small subset of RFC 6455 the console
needs: single-frame text messages up to the wire line limit, close,
and ping/pong. Fragmented or oversized frames close the connection.
"""

from __future__ import annotations

import base64
import hashlib
import socket
import socketserver
import struct
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .node import Node
from .wire import MAX_LINE_BYTES

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".map": "application/json",
}


class TcpLineServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, node: Node, host: str = "127.0.0.1", port: int = 0):
        self.node = node
        super().__init__((host, port), _TcpHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        node: Node = self.server.node
        write_lock = threading.Lock()

        def send(line: str):
            with write_lock:
                self.wfile.write(line.encode("utf-8") + b"\n")
                self.wfile.flush()

        session = node.open_session(send=send)
        try:
            while True:
                raw = self.rfile.readline(MAX_LINE_BYTES + 2)
                if not raw:
                    break
                if not raw.endswith(b"\n") and \
                        len(raw) >= MAX_LINE_BYTES + 2:
                    # drain the rest of the oversized line so the next
                    # read starts on a line boundary; one error per line
                    while True:
                        more = self.rfile.readline(65536)
                        if not more or more.endswith(b"\n"):
                            break
                for response in node.handle_line(session,
                                                 raw.rstrip(b"\r\n")):
                    send(response)
        except (ConnectionError, OSError):
            pass
        finally:
            node.close_session(session)


# -- WebSocket helpers ---------------------------------------------------

def ws_accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode(payload: bytes, opcode: int = 0x1) -> bytes:
    """Server-side frame: FIN set, never masked."""
    head = bytes([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head += bytes([n])
    elif n < 1 << 16:
        head += bytes([126]) + struct.pack(">H", n)
    else:
        head += bytes([127]) + struct.pack(">Q", n)
    return head + payload


def ws_read_frame(rfile) -> tuple[int, bytes] | None:
    """One frame as (opcode, payload); None on EOF or protocol error."""
    head = rfile.read(2)
    if len(head) < 2:
        return None
    fin = head[0] & 0x80
    opcode = head[0] & 0x0F
    masked = head[1] & 0x80
    length = head[1] & 0x7F
    if not fin or opcode == 0x0:
        return None                     # fragmentation unsupported
    if length == 126:
        ext = rfile.read(2)
        if len(ext) < 2:
            return None
        length = struct.unpack(">H", ext)[0]
    elif length == 127:
        ext = rfile.read(8)
        if len(ext) < 8:
            return None
        length = struct.unpack(">Q", ext)[0]
    if length > MAX_LINE_BYTES + 2:
        return None
    mask = rfile.read(4) if masked else b""
    payload = rfile.read(length)
    if len(payload) < length:
        return None
    if masked:
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    return opcode, payload


class WebServer(ThreadingHTTPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, node: Node, assets_dir: str | Path | None,
                 host: str = "127.0.0.1", port: int = 0):
        self.node = node
        self.assets_dir = Path(assets_dir) if assets_dir else None
        super().__init__((host, port), _HttpHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]


class _HttpHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, *args):        # quiet by default
        pass

    def do_GET(self):
        if self.path in ("/ws", "/ws/"):
            self._websocket()
            return
        self._static()

    def _static(self):
        server: WebServer = self.server
        root = server.assets_dir
        if root is None:
            self.send_error(HTTPStatus.NOT_FOUND, "no assets configured")
            return
        rel = self.path.split("?", 1)[0].lstrip("/") or "index.html"
        target = (root / rel).resolve()
        if not str(target).startswith(str(root.resolve())) \
                or not target.is_file():
            self.send_error(HTTPStatus.NOT_FOUND)
            return
        body = target.read_bytes()
        self.send_response(HTTPStatus.OK)
        self.send_header("Content-Type", _CONTENT_TYPES.get(
            target.suffix, "application/octet-stream"))
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _websocket(self):
        key = self.headers.get("Sec-WebSocket-Key")
        upgrade = (self.headers.get("Upgrade") or "").lower()
        if upgrade != "websocket" or not key:
            self.send_error(HTTPStatus.BAD_REQUEST, "not a websocket "
                            "upgrade")
            return
        self.send_response_only(HTTPStatus.SWITCHING_PROTOCOLS)
        self.send_header("Upgrade", "websocket")
        self.send_header("Connection", "Upgrade")
        self.send_header("Sec-WebSocket-Accept", ws_accept_key(key))
        self.end_headers()
        self.close_connection = True

        node: Node = self.server.node
        write_lock = threading.Lock()

        def send(line: str):
            with write_lock:
                self.wfile.write(ws_encode(line.encode("utf-8")))
                self.wfile.flush()

        session = node.open_session(send=send)
        try:
            while True:
                frame = ws_read_frame(self.rfile)
                if frame is None:
                    break
                opcode, payload = frame
                if opcode == 0x8:                       # close
                    with write_lock:
                        self.wfile.write(ws_encode(payload, opcode=0x8))
                        self.wfile.flush()
                    break
                if opcode == 0x9:                       # ping -> pong
                    with write_lock:
                        self.wfile.write(ws_encode(payload, opcode=0xA))
                        self.wfile.flush()
                    continue
                if opcode != 0x1:                       # text only
                    continue
                for response in node.handle_line(session, payload):
                    send(response)
        except (ConnectionError, OSError):
            pass
        finally:
            node.close_session(session)


def serve_forever(node: Node, port: int, ws_port: int | None = None,
                  assets_dir=None, host: str = "127.0.0.1"):
    """Run the TCP server (and optionally the web server) until
    interrupted. Returns the constructed servers for tests."""
    tcp = TcpLineServer(node, host, port)
    web = None
    threads = [threading.Thread(target=tcp.serve_forever, daemon=True)]
    if ws_port is not None:
        web = WebServer(node, assets_dir, host, ws_port)
        threads.append(threading.Thread(target=web.serve_forever,
                                        daemon=True))
    for t in threads:
        t.start()
    return tcp, web, threads
