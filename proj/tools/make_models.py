#!/usr/bin/env python3
"""Regenerate the deterministic example models under models/."""
import json
import pathlib

import numpy as np

P = 17592185536511
out = pathlib.Path(__file__).resolve().parent.parent / "models"
out.mkdir(exist_ok=True)


def fc(rng, ni, no, w):
    return {"type": "fc", "dims": [ni, no], "weights": rng.integers(-w, w + 1, size=(no, ni)).tolist()}


def dump(name, model, inp):
    (out / f"{name}.json").write_text(json.dumps(model, separators=(",", ":")) + "\n")
    (out / f"{name}_input.json").write_text(json.dumps(inp) + "\n")


rng = np.random.default_rng(20240611)
mlp = {"name": "mlp", "modulus": P, "slots": 4096, "method": "simc2", "activation": "relu", "input_bound": 15,
       "layers": [fc(rng, 784, 128, 3), fc(rng, 128, 128, 3), fc(rng, 128, 10, 3)]}
dump("mlp", mlp, rng.integers(0, 16, size=784).tolist())

tiny = {"name": "tiny", "modulus": P, "slots": 64, "method": "simc2", "activation": "relu", "input_bound": 15,
        "layers": [fc(rng, 16, 8, 4), fc(rng, 8, 8, 4), fc(rng, 8, 4, 4)]}
dump("tiny", tiny, rng.integers(-15, 16, size=16).tolist())

conv = {"name": "tiny_conv", "modulus": P, "slots": 64, "method": "simc2", "activation": "relu", "input_bound": 15,
        "layers": [{"type": "conv", "dims": {"u_w": 4, "u_h": 4, "c_i": 4, "c_o": 4, "k_w": 3, "k_h": 3},
                    "kernels": rng.integers(-3, 4, size=4 * 4 * 9).tolist()},
                   fc(rng, 64, 10, 3)]}
dump("tiny_conv", conv, rng.integers(-15, 16, size=64).tolist())
