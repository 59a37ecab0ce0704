#!/usr/bin/env python3
# Copyright 2026 The mugcat Authors
# SPDX-License-Identifier: Apache-2.0
"""Independent re-derivation of the stub backends and the end-to-end turn.

Shares no code with the C++ library. Generates the "book"+"read" stream
fixture, its pipeline config, and the golden ConversationTurn JSON, and
prints the frozen constants used by the unit tests.

    python3 tests/oracle/stub_oracle.py tests/fixtures
"""

import base64
import json
import math
import struct
import sys
import zlib
from pathlib import Path

MASK = (1 << 64) - 1

VOCABULARY = """book drink computer before chair go clothes who candy cousin deaf
fine help no thin walk year yes all black cool finish hot like many mother now
orange table thanksgiving what woman bed blue bowling can dog family fish
graduate hat hearing kiss language later man shirt study tall white wrong
accident apple bird change color corn cow dance dark doctor eat enjoy forget
give last meet pink pizza play school secretary short time want work africa
basketball birthday brown but cheat city cook decide full how jacket letter
medicine need paint paper pull purple right same son tell read""".split()
assert len(VOCABULARY) == 100 and len(set(VOCABULARY)) == 100

EMBED_DIM = 64


def fnv1a(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & MASK
    return h


def splitmix_stream(state: int):
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        yield z ^ (z >> 31)


def noise(seed: int, n: int) -> bytearray:
    out = bytearray()
    gen = splitmix_stream(seed)
    while len(out) < n:
        out += struct.pack("<Q", next(gen))
    return out[:n]


def png_rgb(width: int, height: int, rgb: bytes) -> bytes:
    raw = bytearray()
    stride = width * 3
    for y in range(height):
        raw.append(0)
        raw += rgb[y * stride:(y + 1) * stride]

    def chunk(tag: bytes, data: bytes) -> bytes:
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) +
            chunk(b"IDAT", zlib.compress(bytes(raw), 6)) + chunk(b"IEND", b""))


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def ascii_lower(s: str) -> str:
    return "".join(chr(ord(c) + 32) if "A" <= c <= "Z" else c for c in s)


def tokens(text: str):
    out, cur = [], ""
    for c in text:
        if c in " \t\n\r\f\v":
            if cur:
                out.append(cur)
            cur = ""
        else:
            cur += c
    if cur:
        out.append(cur)
    return out


def embed(text: str):
    vec = [0.0] * EMBED_DIM
    for tok in tokens(ascii_lower(text)):
        h = fnv1a(tok.encode("utf-8"))
        vec[h % EMBED_DIM] += -1.0 if (h >> 63) & 1 else 1.0
    return vec


def cosine(u, v):
    dot = nu = nv = 0.0
    for a, b in zip(u, v):
        dot += a * b
    for a in u:
        nu += a * a
    for b in v:
        nv += b * b
    c = dot / (math.sqrt(nu) * math.sqrt(nv))
    return min(1.0, max(-1.0, c))


def synthesize(prompt, steps, width, height, k, seed):
    request = {"height": height, "k": k, "prompt": prompt, "seed": seed,
               "steps": steps, "width": width}
    request_id = "%016x" % fnv1a(canonical(request).encode("utf-8"))
    prompt_hash = fnv1a(prompt.encode("utf-8"))
    images = []
    for i in range(k):
        pixels = noise(seed ^ i ^ prompt_hash, width * height * 3)
        payload = ("%s|k=%d" % (prompt, i)).encode("utf-8")
        header = b"MGCT" + struct.pack(">I", len(payload)) + payload
        pixels[:len(header)] = header
        images.append({"image_id": "%s-%d" % (request_id, i), "ordinal": i,
                       "png_bytes": base64.b64encode(png_rgb(width, height, bytes(pixels))).decode(),
                       "request_ref": request_id, "_payload": payload.decode()})
    return request, images


def caption_for(payload: str) -> str:
    prompt, _, idx = payload.rpartition("|k=")
    i = int(idx)
    return "a photo of %s" % prompt if i == 0 else "a photo of %s variant %d" % (prompt, i)


def crafted_frame(label: str, base: int, w: int, h: int) -> bytes:
    target = VOCABULARY.index(label)
    for counter in range(1 << 20):
        data = bytearray([base]) * (w * h * 3)
        data[0:4] = struct.pack(">I", counter)
        if fnv1a(bytes(data)) % 100 == target:
            return bytes(data)
    raise RuntimeError("no frame found")


def main(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    w = h = 32
    window = 16
    fps = 25
    frames = [crafted_frame("book", 0x40, w, h)] * window + [crafted_frame("read", 0x80, w, h)] * window
    mclip = b"MCLP" + struct.pack(">BHHHI", 1, w, h, fps, len(frames)) + b"".join(frames)
    (out_dir / "book_read.mclip").write_bytes(mclip)

    config = {"window_len": window, "stride": window, "confidence_threshold": 0.5,
              "k": 2, "steps": 20, "width": 384, "height": 384, "seed": 7}
    (out_dir / "book_read.conf").write_text(
        "# Pipeline config for the book_read stream fixture.\n" +
        "".join("%s = %s\n" % (key, val) for key, val in config.items()))

    # Stub recognizer: FNV-1a of the center frame of each 16-frame window.
    labels = [VOCABULARY[fnv1a(frames[start + window // 2]) % 100] for start in (0, window)]
    assert labels == ["book", "read"], labels
    keywords = labels
    accepted_at = ["book_read:0", "book_read:16"]
    query = " ".join(ascii_lower(k) for k in keywords)

    request, images = synthesize(query, config["steps"], config["width"], config["height"],
                                 config["k"], config["seed"])
    q_emb = embed(query)
    candidates, scores = [], []
    for img in images:
        text = caption_for(img.pop("_payload"))
        emb = embed(text)
        score = cosine(emb, q_emb)
        scores.append(score)
        candidates.append({"caption": {"image_ref": img["image_id"], "text": text},
                           "caption_embedding": {"dim": EMBED_DIM, "vector": emb},
                           "image": img, "score": score})
    best = max(range(len(scores)), key=lambda i: (scores[i], -i))
    turn = {
        "candidates": candidates,
        "keywords": {"accepted_at": accepted_at, "keywords": keywords},
        "override": None,
        "query_embedding": {"dim": EMBED_DIM, "vector": q_emb},
        "query_text": query,
        "request": request,
        "selection": {"scores": scores, "selected_caption": candidates[best]["caption"]["text"],
                      "selected_image": candidates[best]["image"]["image_id"],
                      "selected_index": best},
        "stage_timings_ms": {s: 0.0 for s in ("caption", "embed", "recognize", "select", "synthesize")},
        "turn_id": 1,
    }
    (out_dir / "book_read.golden.json").write_text(canonical(turn) + "\n")

    print("selected", best, candidates[best]["caption"]["text"], scores)
    zero = bytes(16 * 16 * 3)
    print("fnv1a(zero 16x16 frame) =", hex(fnv1a(zero)), "label", VOCABULARY[fnv1a(zero) % 100])
    zero64 = bytes(64 * 64 * 3)
    print("fnv1a(zero 64x64 frame) =", hex(fnv1a(zero64)), "label", VOCABULARY[fnv1a(zero64) % 100])
    for tok in ("book", "read", "a", "photo", "of"):
        hv = fnv1a(tok.encode())
        print("fnv1a(%r) = %s index %d sign %d" % (tok, hex(hv), hv % 64, -1 if hv >> 63 else 1))
    print("fnv1a('') =", hex(fnv1a(b"")), "fnv1a('a') =", hex(fnv1a(b"a")))
    g = splitmix_stream(0)
    print("splitmix64(0) first three:", [hex(next(g)) for _ in range(3)])
    req, imgs = synthesize("book read", 20, 384, 384, 2, 7)
    print("request id (book read, seed 7, k 2, 384):", req and imgs[0]["request_ref"])
    print("sha-free png size image0:", len(base64.b64decode(imgs[0]["png_bytes"])))


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "tests/fixtures"))
