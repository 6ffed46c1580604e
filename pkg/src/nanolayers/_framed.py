"""Framed binary container used by dataset and model files.

Layout: a 4-byte magic tag plus newline, a UTF-8 ``key: value`` manifest
block terminated by a ``---`` line, the raw payload bytes, and a trailing
little-endian CRC-32 of the payload. The manifest always carries
``payload_bytes`` so truncation is detectable without heuristics.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib


class FileFormatError(Exception):
    """Base class for malformed container files."""


class VersionMismatchError(FileFormatError):
    """Magic tag does not match the expected format version."""


class TruncatedFileError(FileFormatError):
    """File ends before the declared payload and checksum."""


class ChecksumError(FileFormatError):
    """Payload bytes do not match the stored CRC-32."""


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_framed(path, magic: bytes, manifest: dict, payload: bytes) -> None:
    if len(magic) != 4:
        raise ValueError("magic tag must be 4 bytes")
    lines = [magic.decode("ascii")]
    for key, value in manifest.items():
        text = str(value)
        if "\n" in key or "\n" in text:
            raise ValueError(f"manifest entry {key!r} contains a newline")
        lines.append(f"{key}: {text}")
    lines.append(f"payload_bytes: {len(payload)}")
    lines.append("---")
    header = ("\n".join(lines) + "\n").encode("utf-8")
    crc = struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF)
    atomic_write_bytes(path, header + payload + crc)


def read_framed(path, magic: bytes):
    """Return (manifest dict, payload bytes), validating framing and CRC."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head, sep, rest = blob.partition(b"\n")
    if head != magic:
        raise VersionMismatchError(
            f"{path}: expected {magic.decode('ascii')} file, found {head[:8]!r}"
        )
    if not sep:
        raise TruncatedFileError(f"{path}: missing manifest")
    manifest = {}
    while True:
        line, sep, rest = rest.partition(b"\n")
        if not sep:
            raise TruncatedFileError(f"{path}: manifest not terminated by ---")
        if line == b"---":
            break
        key, colon, value = line.decode("utf-8").partition(": ")
        if not colon:
            raise FileFormatError(f"{path}: malformed manifest line {line!r}")
        manifest[key] = value
    try:
        payload_bytes = int(manifest.pop("payload_bytes"))
    except (KeyError, ValueError):
        raise TruncatedFileError(f"{path}: missing payload_bytes declaration")
    if len(rest) < payload_bytes + 4:
        raise TruncatedFileError(
            f"{path}: expected {payload_bytes + 4} bytes after manifest, "
            f"found {len(rest)}"
        )
    if len(rest) > payload_bytes + 4:
        raise FileFormatError(f"{path}: trailing bytes after checksum")
    payload = rest[:payload_bytes]
    (stored_crc,) = struct.unpack("<I", rest[payload_bytes:])
    if stored_crc != (zlib.crc32(payload) & 0xFFFFFFFF):
        raise ChecksumError(f"{path}: payload CRC mismatch")
    return manifest, payload
