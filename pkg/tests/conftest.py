import numpy as np
import pytest
import torch

from pgcu.module import PGCUConfig

FD_STEP = 1e-6
FD_REL_TOL = 1e-4
FD_ABS_TOL = 1e-7


def desk_config(**kw):
    """C=2, LRMS 4x4, PAN 16x16, D=8: one PAN DS block, LRMS fed straight to the fusion conv (n=16)."""
    base = dict(channels=2, pan_ds_blocks=1, ms_ds_blocks=0, feat_dim=8, hidden_channels=8)
    base.update(kw)
    return PGCUConfig(**base)


def desk_inputs(seed=0, channels=2, dtype=torch.float64):
    g = torch.Generator().manual_seed(seed)
    lrms = torch.rand(1, channels, 4, 4, generator=g, dtype=dtype)
    pan = torch.rand(1, 1, 16, 16, generator=g, dtype=dtype)
    return lrms, pan


def finite_difference_check(model, lrms, pan, upstream, analytic, step=FD_STEP):
    """Central differences of J = <model(lrms, pan), upstream> for every parameter and input entry.

    Returns {name: (normwise relative error, max abs error)}.
    """
    targets = {n: p for n, p in model.named_parameters() if n in analytic}
    targets["lrms"] = lrms
    targets["pan"] = pan
    report = {}
    with torch.no_grad():

        def J():
            return float((model(lrms, pan) * upstream).sum())

        for name, t in targets.items():
            flat = t.data.view(-1)
            num = np.empty(flat.numel())
            for i in range(flat.numel()):
                old = flat[i].item()
                flat[i] = old + step
                jp = J()
                flat[i] = old - step
                jm = J()
                flat[i] = old
                num[i] = (jp - jm) / (2 * step)
            a = analytic[name].detach().reshape(-1).numpy()
            err = np.abs(a - num)
            scale = max(np.abs(num).max(), np.abs(a).max())
            rel = err.max() / scale if scale > 0 else err.max()
            report[name] = (float(rel), float(err.max()))
    return report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = {}


def record_acceptance(number, passed, detail):
    """Register the one-line verdict for an acceptance criterion; printed in the terminal summary."""
    ACCEPTANCE_LINES[number] = f"acceptance #{number}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
