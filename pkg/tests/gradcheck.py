"""Directional finite-difference checks for model parameters."""
import torch


def directional_errors(model, loss_fn, params, n_directions=5, h=1e-6, seed=0):
    """Relative errors between autograd and central differences along random directions."""
    gen = torch.Generator().manual_seed(seed)
    model.zero_grad()
    loss_fn().backward()
    grads = [p.grad.detach().clone() for p in params]
    errors = []
    for _ in range(n_directions):
        dirs = [torch.randn(p.shape, generator=gen, dtype=p.dtype) for p in params]
        norm = torch.sqrt(sum((d * d).sum() for d in dirs))
        dirs = [d / norm for d in dirs]
        analytic = float(sum((g * d).sum() for g, d in zip(grads, dirs)))
        with torch.no_grad():
            for p, d in zip(params, dirs):
                p.add_(h * d)
            up = float(loss_fn())
            for p, d in zip(params, dirs):
                p.sub_(2 * h * d)
            down = float(loss_fn())
            for p, d in zip(params, dirs):
                p.add_(h * d)
        numeric = (up - down) / (2 * h)
        errors.append(abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8))
    return errors
