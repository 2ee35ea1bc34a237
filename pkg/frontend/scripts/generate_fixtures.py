#!/usr/bin/env python3
"""Regenerate src/fixtures/alignments.json from the local review service.

Spins the service up in-process over a synthetic corpus, runs a scripted
external engine whose hypotheses exercise every alignment op (matches,
substitutions, deletions, insertions, dropped words, empty output), and
freezes the exact recognize-endpoint payloads the UI must agree with.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from scribebench.engines import EngineHandle
from scribebench.service import create_app
from scribebench.synth import write_corpus
from scribebench.textnorm import SYRIAC_ALPHABET

OUT = Path(__file__).resolve().parent.parent / "src" / "fixtures" / "alignments.json"

LETTERS = sorted(chr(cp) for cp in SYRIAC_ALPHABET)


def mutate(text: str, case: int) -> str:
    """Deterministic per-case corruption covering all op kinds."""
    words = text.split(" ")
    chars = list(text)
    kind = case % 8
    if kind == 0:
        return text
    if kind == 1:  # substitute one letter
        i = case % len(chars)
        if chars[i] == " ":
            i = (i + 1) % len(chars)
        chars[i] = LETTERS[(LETTERS.index(chars[i]) + 3) % len(LETTERS)]
        return "".join(chars)
    if kind == 2:  # delete a letter
        i = case % len(chars)
        if chars[i] == " ":
            i = (i + 1) % len(chars)
        del chars[i]
        return "".join(chars)
    if kind == 3:  # insert a letter
        i = case % (len(chars) + 1)
        chars.insert(i, LETTERS[case % len(LETTERS)])
        return "".join(chars).strip()
    if kind == 4:  # drop a word
        kept = words[:-1] if len(words) > 1 else words
        return " ".join(kept)
    if kind == 5:  # empty hypothesis
        return ""
    if kind == 6:  # swap first two words
        if len(words) > 1:
            words[0], words[1] = words[1], words[0]
        return " ".join(words)
    # duplicate last word
    return " ".join(words + [words[-1]])


def main() -> None:
    tmp = Path(tempfile.mkdtemp(prefix="ui-fixtures-"))
    root = tmp / "data"
    write_corpus(root, 20, seed=202)

    hyp_map = {}
    for i, gt_path in enumerate(sorted(root.glob("*.gt.txt"))):
        sample_id = gt_path.name[: -len(".gt.txt")]
        hyp_map[sample_id] = mutate(gt_path.read_text(encoding="utf-8").strip(), i)
    (tmp / "hyp_map.json").write_text(json.dumps(hyp_map, ensure_ascii=False))

    stub = tmp / "scripted_engine.py"
    stub.write_text(
        "import json, pathlib, sys\n"
        f"hyp = json.loads(pathlib.Path({str(tmp / 'hyp_map.json')!r}).read_text())\n"
        "print(hyp[pathlib.Path(sys.argv[1]).stem])\n",
        encoding="utf-8",
    )
    engine = EngineHandle(
        kind="external", command=f"{sys.executable} {stub} {{image}}", timeout=10.0
    )
    client = TestClient(create_app(root, engines={"scripted": engine}))

    fixtures = []
    for sample_id in sorted(hyp_map):
        assert client.post(f"/samples/{sample_id}/reprocess", json={"blur_k": 1}).status_code == 200
        doc = client.post(
            f"/samples/{sample_id}/recognize", json={"engine": "scripted"}
        ).json()
        sample = client.get(f"/samples/{sample_id}").json()
        fixtures.append(
            {
                "id": sample_id,
                "ground_truth": sample["ground_truth"],
                "hypothesis": doc["hypothesis"],
                "cer": doc["cer"],
                "alignment": doc["alignment"],
            }
        )
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixtures, ensure_ascii=False, indent=2), encoding="utf-8")
    print(f"wrote {len(fixtures)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
