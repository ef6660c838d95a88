"""Central finite-difference oracle used by the gradient suites.

Independent of autograd: it re-evaluates the forward closure at perturbed
inputs and compares the quotient against the analytic gradient.
"""

import numpy as np
import torch


def central_difference_check(build_scalar, tensors, n_coords=100, eps=1e-5, rtol=1e-4, seed=0):
    """Compare autograd gradients of ``build_scalar()`` against central differences.

    ``tensors`` are float64 leaf tensors with requires_grad that the closure
    reads; ``n_coords`` coordinates are sampled across all of them. Returns
    the worst relative error seen.
    """
    for t in tensors:
        assert t.dtype == torch.float64, "gradient checks run in double precision"
        assert t.requires_grad
    out = build_scalar()
    grads = torch.autograd.grad(out, tensors, allow_unused=True)

    coords = [(ti, flat) for ti, t in enumerate(tensors) for flat in range(t.numel())]
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(coords), size=min(n_coords, len(coords)), replace=False)

    worst = 0.0
    for ci in picked:
        ti, flat = coords[int(ci)]
        t = tensors[ti]
        with torch.no_grad():
            orig = t.view(-1)[flat].item()
            t.view(-1)[flat] = orig + eps
        f_plus = build_scalar().detach().item()
        with torch.no_grad():
            t.view(-1)[flat] = orig - eps
        f_minus = build_scalar().detach().item()
        with torch.no_grad():
            t.view(-1)[flat] = orig
        fd = (f_plus - f_minus) / (2.0 * eps)
        an = 0.0 if grads[ti] is None else grads[ti].view(-1)[flat].item()
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
        assert rel <= rtol, (
            f"gradient mismatch at tensor {ti} flat index {flat}: "
            f"finite-difference {fd:.3e} vs analytic {an:.3e} (rel {rel:.3e})"
        )
        worst = max(worst, rel)
    return worst
