"""Wire protocol and client for out-of-process denoisers.

A denoiser served behind this bridge (typically a neural sampler in its own
process, possibly a different runtime) receives framed requests over a byte
stream and answers with framed responses:

    request  = b"OAMPNLE1" | u64 LE length N | f64 LE t_star | f64 LE v
               | N x f32 LE payload
    response = b"OAMPNLE2" | u64 LE length N | N x f32 LE payload

All integers and floats are little-endian; big-endian is never used.  The
stream is either a spawned child's stdio or a TCP socket.  Every round trip
is guarded by a deadline; timeouts, short reads, bad magic, and length
mismatches raise BridgeError subclasses, which the receiver loop treats as
a recoverable denoiser fault.

One client serves one receiver run at a time; concurrent runs need separate
clients.
"""

import os
import selectors
import socket
import struct
import subprocess
import sys
import time

import numpy as np

from .errors import (BridgeError, BridgeProtocolError, BridgeTimeoutError,
                     InvalidParameterError)

__all__ = [
    "REQUEST_MAGIC",
    "RESPONSE_MAGIC",
    "encode_request",
    "decode_request",
    "encode_response",
    "BridgeClient",
    "BridgePrior",
]

REQUEST_MAGIC = b"OAMPNLE1"
RESPONSE_MAGIC = b"OAMPNLE2"
_REQ_HEAD = struct.Struct("<8sQdd")
_RSP_HEAD = struct.Struct("<8sQ")


def encode_request(s_in, t_star, v):
    """Frame a denoiser request; payload is cast to f32."""
    payload = np.asarray(s_in, dtype="<f4")
    if payload.ndim != 1:
        raise InvalidParameterError("payload must be a 1-D vector")
    head = _REQ_HEAD.pack(REQUEST_MAGIC, payload.size, float(t_star), float(v))
    return head + payload.tobytes()


def decode_request(head_bytes):
    """Parse a request header; returns (length, t_star, v).

    The payload (length * 4 bytes) follows on the stream and is read
    separately.
    """
    magic, n, t_star, v = _REQ_HEAD.unpack(head_bytes)
    if magic != REQUEST_MAGIC:
        raise BridgeProtocolError(f"bad request magic {magic!r}")
    return n, t_star, v


def encode_response(values):
    """Frame a denoiser response; payload is cast to f32."""
    payload = np.asarray(values, dtype="<f4")
    head = _RSP_HEAD.pack(RESPONSE_MAGIC, payload.size)
    return head + payload.tobytes()


class BridgeClient:
    """Framed request/response channel to an external denoiser.

    Build with :meth:`spawn` (child process over stdio) or :meth:`connect`
    (TCP).  ``timeout`` bounds each full round trip.
    """

    def __init__(self, timeout=5.0):
        if timeout <= 0:
            raise InvalidParameterError("timeout must be > 0")
        self.timeout = float(timeout)
        self._proc = None
        self._sock = None
        self._rfd = None
        self._wfd = None

    @classmethod
    def spawn(cls, argv, timeout=5.0):
        """Start ``argv`` as a child and speak the protocol on its stdio."""
        client = cls(timeout=timeout)
        client._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)
        client._rfd = client._proc.stdout.fileno()
        client._wfd = client._proc.stdin.fileno()
        os.set_blocking(client._rfd, False)
        os.set_blocking(client._wfd, False)
        return client

    @classmethod
    def connect(cls, host, port, timeout=5.0):
        """Connect to a denoiser server listening on a TCP socket."""
        client = cls(timeout=timeout)
        client._sock = socket.create_connection((host, port),
                                                timeout=timeout)
        client._sock.setblocking(False)
        client._rfd = client._sock.fileno()
        client._wfd = client._sock.fileno()
        return client

    # -- byte-level I/O with a shared deadline --------------------------------

    def _wait(self, fd, event, deadline, what):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise BridgeTimeoutError(f"bridge timeout while {what}")
        sel = selectors.DefaultSelector()
        try:
            sel.register(fd, event)
            if not sel.select(remaining):
                raise BridgeTimeoutError(f"bridge timeout while {what}")
        finally:
            sel.close()

    def _send(self, data, deadline):
        view = memoryview(data)
        while view:
            self._wait(self._wfd, selectors.EVENT_WRITE, deadline, "writing")
            try:
                if self._sock is not None:
                    sent = self._sock.send(view)
                else:
                    sent = os.write(self._wfd, view)
            except (BlockingIOError, InterruptedError):
                continue
            except OSError as exc:
                raise BridgeError(f"bridge write failed: {exc}") from exc
            view = view[sent:]

    def _recv_exact(self, nbytes, deadline):
        chunks = []
        got = 0
        while got < nbytes:
            self._wait(self._rfd, selectors.EVENT_READ, deadline, "reading")
            try:
                if self._sock is not None:
                    chunk = self._sock.recv(nbytes - got)
                else:
                    chunk = os.read(self._rfd, nbytes - got)
            except (BlockingIOError, InterruptedError):
                continue
            except OSError as exc:
                raise BridgeError(f"bridge read failed: {exc}") from exc
            if not chunk:
                raise BridgeProtocolError(
                    f"bridge closed the stream after {got} of {nbytes} bytes")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    # -- protocol -------------------------------------------------------------

    def denoise_once(self, s_in, t_star, v):
        """One round trip; returns the response payload as float64."""
        if self._rfd is None:
            raise BridgeError("bridge is closed")
        s_in = np.asarray(s_in)
        deadline = time.monotonic() + self.timeout
        self._send(encode_request(s_in, t_star, v), deadline)
        head = self._recv_exact(_RSP_HEAD.size, deadline)
        magic, n = _RSP_HEAD.unpack(head)
        if magic != RESPONSE_MAGIC:
            raise BridgeProtocolError(f"bad response magic {magic!r}")
        payload = self._recv_exact(4 * n, deadline)
        if n != s_in.size:
            raise BridgeProtocolError(
                f"bridge returned {n} values for a {s_in.size}-point request")
        return np.frombuffer(payload, dtype="<f4").astype(np.float64)

    def close(self):
        if self._sock is not None:
            self._sock.close()
            self._sock = None
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
            self._proc = None
        self._rfd = None
        self._wfd = None

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


def spawn_echo_bridge(mode="echo", scale=1.0, timeout=5.0):
    """Convenience: spawn the bundled loopback server (for tests/demos)."""
    argv = [sys.executable, "-m", "rmoamp.echo_bridge",
            "--mode", mode, "--scale", repr(float(scale))]
    return BridgeClient.spawn(argv, timeout=timeout)


class BridgePrior:
    """Denoiser prior that round-trips every evaluation over a bridge.

    snr_kind defaults to "flow-matching" so t_star carries the matched
    interpolation time; set it to "ddim" (target alpha level) or None
    (raw NaN) to suit the remote model.
    """

    def __init__(self, client, snr_kind="flow-matching"):
        if snr_kind not in ("flow-matching", "ddim", None):
            raise InvalidParameterError(f"unknown snr kind {snr_kind!r}")
        self.client = client
        self.snr_kind = snr_kind
        self.eval_count = 0

    def denoise(self, s_in, t_star, v):
        self.eval_count += 1
        return self.client.denoise_once(s_in, t_star, v)
