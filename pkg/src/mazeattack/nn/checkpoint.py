"""Checkpoint files: a text header followed by a little-endian f64 blob.

Layout::

    mazeattack-checkpoint 1
    dtype f64-le
    seed <int|none>
    layers <layer spec>
    tensor <name> <dim,dim,...>
    ...
    meta <key> <value>        (optional, any number)
    end
    <raw f64 values of every tensor, in header order>
"""

from __future__ import annotations

import numpy as np

from .layers import Model

MAGIC = "mazeattack-checkpoint 1"


def save_checkpoint(model, path, meta=None):
    state = model.state()
    lines = [MAGIC, "dtype f64-le", f"seed {model.seed if model.seed is not None else 'none'}", f"layers {model.spec}"]
    for name, arr in state.items():
        lines.append(f"tensor {name} {','.join(str(n) for n in arr.shape)}")
    for k, v in (meta or {}).items():
        lines.append(f"meta {k} {v}")
    lines.append("end")
    header = ("\n".join(lines) + "\n").encode("ascii")
    blob = b"".join(np.ascontiguousarray(arr, dtype="<f8").tobytes() for arr in state.values())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(blob)


def load_checkpoint(path):
    """Return ``(model, meta)``; parameters are restored bit-exactly."""
    with open(path, "rb") as fh:
        raw = fh.read()
    marker = b"\nend\n"
    cut = raw.find(marker)
    if cut < 0:
        raise ValueError(f"{path}: no header terminator")
    header = raw[:cut].decode("ascii").split("\n")
    blob = raw[cut + len(marker):]
    if header[0] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic {header[0]!r})")
    seed, spec, tensors, meta = None, None, [], {}
    for line in header[1:]:
        key, _, rest = line.partition(" ")
        if key == "dtype" and rest != "f64-le":
            raise ValueError(f"unsupported dtype {rest}")
        elif key == "seed":
            seed = None if rest == "none" else int(rest)
        elif key == "layers":
            spec = rest
        elif key == "tensor":
            name, dims = rest.split(" ")
            shape = tuple(int(d) for d in dims.split(",")) if dims else ()
            tensors.append((name, shape))
        elif key == "meta":
            k, _, v = rest.partition(" ")
            meta[k] = v
    values = np.frombuffer(blob, dtype="<f8")
    state, off = {}, 0
    for name, shape in tensors:
        n = int(np.prod(shape)) if shape else 1
        state[name] = values[off:off + n].reshape(shape).astype(np.float64)
        off += n
    if off != len(values):
        raise ValueError(f"{path}: blob has {len(values)} values, header declares {off}")
    model = Model(spec, seed=seed)
    model.load_state(state)
    return model, meta
