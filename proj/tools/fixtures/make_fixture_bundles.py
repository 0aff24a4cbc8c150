#!/usr/bin/env python3
"""Writes the NWB1 bundles, reference statistics and problem specs used by the
tests and demos. Weights are random (seeded), not trained: the trained model
zoo is produced separately and uses the same formats.

Usage: make_fixture_bundles.py [--root DIR]
"""
import argparse
import json
import struct
import zlib
from pathlib import Path

import numpy as np


def dense(rng, n_in, n_out, scale=None):
    scale = scale if scale is not None else 1.0 / np.sqrt(n_in)
    w = (rng.standard_normal((n_out, n_in)) * scale).astype(np.float32)
    b = (rng.standard_normal(n_out) * 0.1).astype(np.float32)
    return {"kind": "dense", "W": w, "b": b}


def act(kind, **params):
    return {"kind": kind, "params": params}


def forward(layers, x):
    x = np.asarray(x, dtype=np.float64)
    for layer in layers:
        kind = layer["kind"]
        if kind == "dense":
            x = layer["W"].astype(np.float64) @ x.reshape(-1) + layer["b"].astype(np.float64)
        elif kind == "tanh":
            x = np.tanh(x)
        elif kind == "sigmoid":
            x = 1.0 / (1.0 + np.exp(-x))
        elif kind == "relu":
            x = np.maximum(x, 0.0)
        elif kind == "leaky_relu":
            x = np.where(x > 0, x, layer["params"]["slope"] * x)
        elif kind == "softmax":
            e = np.exp(x - x.max())
            x = e / e.sum()
        elif kind == "reshape":
            x = x.reshape(layer["params"]["shape"])
        else:
            raise ValueError(kind)
    return x


def encode(name, input_shape, output_kind, layers, rng, n_fixtures=3, metadata=None):
    payload = bytearray()
    manifest_layers = []
    for layer in layers:
        entry = {"kind": layer["kind"], "params": layer.get("params", {})}
        if layer["kind"] == "dense":
            tensors = {}
            for key in ("W", "b"):
                t = layer[key]
                tensors[key] = {"shape": list(t.shape), "offset": len(payload)}
                payload += t.astype("<f4").tobytes()
            entry["tensors"] = tensors
        manifest_layers.append(entry)
    fixtures = []
    for _ in range(n_fixtures):
        x = rng.standard_normal(input_shape)
        fixtures.append({"input": x.tolist(), "output": forward(layers, x).tolist()})
    manifest = {
        "name": name,
        "input_shape": list(input_shape),
        "output_kind": output_kind,
        "layers": manifest_layers,
        "fixtures": fixtures,
        "crc32": zlib.crc32(bytes(payload)) & 0xFFFFFFFF,
    }
    if metadata:
        manifest["metadata"] = metadata
    header = json.dumps(manifest, separators=(",", ":")).encode()
    return b"NWB1" + struct.pack("<I", len(header)) + header + bytes(payload)


def write_bundle(path, *args, **kwargs):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode(*args, **kwargs))


def stats_entry(features):
    f = np.asarray(features, dtype=np.float64)
    return {"count": int(f.shape[0]), "mean": f.mean(axis=0).tolist(), "covariance": np.cov(f, rowvar=False, ddof=1).tolist()}


def reference_stats(embedding_name, layers, images, labels):
    feats = np.array([forward(layers, im) for im in images])
    entries = []
    for label in sorted(set(labels)):
        e = stats_entry(feats[np.array(labels) == label])
        e["label"] = int(label)
        entries.append(e)
    return {"embedding": embedding_name, "labels": entries, "overall": stats_entry(feats)}


def dump_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(obj, indent=2)
    path.write_text(text + "\n")


def compact_lists(text):
    """Puts innermost number lists on one line."""
    import re

    return re.sub(r"\[\s+([-\d.e,\s]+?)\s+\]", lambda m: "[" + ", ".join(v.strip() for v in m.group(1).split(",")) + "]", text)


def dump_spec(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(compact_lists(json.dumps(obj, indent=2)) + "\n")


def tiny(root):
    rng = np.random.default_rng(1)
    out = root / "tests" / "fixtures"
    gen = [dense(rng, 4, 6), act("tanh"), dense(rng, 6, 9), act("sigmoid"), act("reshape", shape=[3, 3])]
    write_bundle(out / "tiny_generator.nwb", "tiny_generator", [4], "image", gen, rng)
    cls = [act("reshape", shape=[9]), dense(rng, 9, 5), act("leaky_relu", slope=0.2), dense(rng, 5, 3), act("softmax")]
    write_bundle(out / "tiny_classifier.nwb", "tiny_classifier", [3, 3], "probabilities", cls, rng)
    rel = [dense(rng, 5, 4), act("relu"), dense(rng, 4, 2)]
    write_bundle(out / "tiny_relu.nwb", "tiny_relu", [5], "logits", rel, rng, metadata={"note": "relu chain"})
    emb = [act("reshape", shape=[9]), dense(rng, 9, 4), act("tanh")]
    write_bundle(out / "tiny_embedding.nwb", "tiny_embedding", [3, 3], "logits", emb, rng)

    labels = [i % 2 for i in range(40)]
    images = [1.0 / (1.0 + np.exp(-(rng.standard_normal((3, 3)) + 2.0 * l))) for l in labels]
    dump_json(out / "tiny_reference_images.json", {"shape": [3, 3], "labels": labels, "images": [im.reshape(-1).tolist() for im in images]})
    dump_json(out / "tiny_reference_stats.json", reference_stats("tiny_embedding", emb, images, labels))


def demo(root):
    rng = np.random.default_rng(7)
    nets = root / "data" / "networks"
    gen = [dense(rng, 16, 32), act("tanh"), dense(rng, 32, 64, scale=0.6), act("sigmoid"), act("reshape", shape=[8, 8])]
    write_bundle(nets / "generator.nwb", "generator", [16], "image", gen, rng)
    for name, seed in (("classifier", 11), ("classifier_independent", 12)):
        r = np.random.default_rng(seed)
        cls = [act("reshape", shape=[64]), dense(r, 64, 32), act("relu"), dense(r, 32, 10), act("softmax")]
        write_bundle(nets / f"{name}.nwb", name, [8, 8], "probabilities", cls, rng)
    emb = [act("reshape", shape=[64]), dense(rng, 64, 32), act("tanh")]
    write_bundle(nets / "embedding.nwb", "embedding", [8, 8], "logits", emb, rng)
    lin = [dense(rng, 16, 64, scale=0.5), act("reshape", shape=[8, 8])]
    write_bundle(nets / "linear_generator.nwb", "linear_generator", [16], "image", lin, rng)

    # Synthetic labelled images: one random pattern per label plus noise.
    patterns = rng.standard_normal((10, 8, 8)) * 2.0
    labels = [k for k in range(10) for _ in range(60)]
    images = [1.0 / (1.0 + np.exp(-(patterns[k] + 0.5 * rng.standard_normal((8, 8))))) for k in labels]
    dump_json(nets / "reference_stats.json", reference_stats("embedding", emb, images, labels))

    specs = root / "data" / "specs"
    dump_spec(specs / "digit_condition.json", {
        "latents": [{"name": "z", "dim": 16}],
        "networks": [{"name": "generator", "bundle": "../networks/generator.nwb"},
                     {"name": "classifier", "bundle": "../networks/classifier.nwb"}],
        "pipelines": [{"name": "image", "input": "z", "stages": [{"op": "network", "name": "generator"}]},
                      {"name": "digit", "input": "image", "stages": [{"op": "network", "name": "classifier"}]}],
        "constraints": [{"type": "categorical", "label": "digit is three", "inputs": ["digit"], "target": 3, "alpha": 100}],
        "metadata": {"seed": 1, "description": "Generator conditioned on a classifier verdict."},
    })

    # Reconstruction: linear generator, coarse-grained noisy observation.
    truth_z = rng.standard_normal(16)
    image = forward(lin, truth_z)
    coarse = image.reshape(4, 2, 4, 2).mean(axis=(1, 3))
    noise = 0.05
    observed = coarse + noise * rng.standard_normal(coarse.shape)
    dump_json(specs / "reconstruct_coarse_data.json", {"data": observed.tolist()})
    masked = image[:, 3:] + noise * rng.standard_normal((8, 5))
    dump_json(specs / "reconstruct_masked_data.json", {"data": masked.reshape(-1).tolist()})
    base = {
        "latents": [{"name": "z", "dim": 16}],
        "networks": [{"name": "generator", "bundle": "../networks/linear_generator.nwb"}],
        "pipelines": [{"name": "image", "input": "z", "stages": [{"op": "network", "name": "generator"}]}],
    }
    dump_spec(specs / "reconstruct_coarse.json", {
        **base,
        "pipelines": base["pipelines"] + [{"name": "coarse", "input": "image", "stages": [{"op": "coarsen", "factor": 2}]}],
        "constraints": [{"type": "gaussian", "label": "coarse data", "inputs": ["coarse"],
                         "target": {"file": "reconstruct_coarse_data.json"}, "noise_cov": noise ** 2}],
        "metadata": {"seed": 3, "description": "Linear generator observed through 2x2 coarse-graining."},
    })
    masked_spec = {
        **base,
        "pipelines": base["pipelines"] + [{"name": "visible", "input": "image", "stages": [{"op": "mask", "columns": [0, 3]}]}],
        "constraints": [{"type": "gaussian", "label": "visible columns", "inputs": ["visible"],
                         "target": {"file": "reconstruct_masked_data.json"}, "noise_cov": noise ** 2}],
        "metadata": {"seed": 3, "description": "Linear generator with the three left columns masked."},
    }
    dump_spec(specs / "reconstruct_masked.json", masked_spec)
    aux = json.loads(json.dumps(masked_spec))
    aux["networks"].append({"name": "classifier", "bundle": "../networks/classifier.nwb"})
    aux["pipelines"].append({"name": "digit", "input": "image", "stages": [{"op": "network", "name": "classifier"}]})
    aux["constraints"].append({"type": "categorical", "label": "digit is three", "inputs": ["digit"], "target": 3, "alpha": 5})
    aux["metadata"]["description"] = "Masked reconstruction with an auxiliary classifier constraint."
    dump_spec(specs / "reconstruct_masked_aux.json", aux)


def riddle(root):
    spec = {
        "latents": [{"name": f"xi{k}", "dim": 10} for k in (1, 2, 3)],
        "networks": [],
        "pipelines": [{"name": f"p{k}", "input": f"xi{k}", "stages": [{"op": "softmax"}]} for k in (1, 2, 3)],
        "constraints": [
            {"type": "logic", "label": "first is odd", "inputs": ["p1"], "entries": [[a] for a in (1, 3, 5, 7, 9)], "alpha": 1},
            {"type": "logic", "label": "second is first plus two", "inputs": ["p1", "p2"],
             "entries": [[a, a + 2] for a in range(8)], "alpha": 1},
            {"type": "logic", "label": "third is first plus second", "inputs": ["p1", "p2", "p3"],
             "entries": [[a, b, a + b] for a in range(10) for b in range(10) if a + b < 10], "alpha": 1},
            {"type": "logic", "label": "third is not seven", "inputs": ["p3"], "entries": [[a] for a in range(10) if a != 7], "alpha": 1},
            {"type": "logic", "label": "third has no closed circles", "inputs": ["p3"],
             "entries": [[a] for a in range(10) if a not in (0, 6, 8, 9)], "alpha": 1},
        ],
        "metadata": {"seed": 0, "description": "Digit riddle over three class-probability vectors; the solution is (1, 3, 4)."},
    }
    dump_spec(root / "data" / "specs" / "riddle_synthetic.json", spec)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--root", type=Path, default=Path(__file__).resolve().parents[2])
    args = parser.parse_args()
    tiny(args.root)
    demo(args.root)
    riddle(args.root)


if __name__ == "__main__":
    main()
