import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resadapt.channel import ChannelModelSpec
from resadapt.config import SearchSettings, SystemConfig
from resadapt.errors import ConfigError, InfeasibleError
from resadapt.montecarlo import (
    BerEstimate,
    min_snr_for_target,
    run_ber,
    snr_loss,
    trial_budget,
    trial_rng,
)

RAYLEIGH = ChannelModelSpec(kind="iid-rayleigh")
FAST = SearchSettings(min_trials=32, batch_trials=32)


def rayleigh_qpsk_ber(gamma):
    return 0.5 * (1.0 - math.sqrt(gamma / (1.0 + gamma)))


def test_trial_rng_is_stable():
    a = trial_rng(7, 3, "noise").standard_normal(4)
    b = trial_rng(7, 3, "noise").standard_normal(4)
    c = trial_rng(7, 3, "channel").standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_ber_estimate_fields():
    e = BerEstimate(25, 1000, 4)
    assert e.ber == 0.025
    assert e.std_err == pytest.approx(math.sqrt(0.025 * 0.975 / 1000))
    s = e + BerEstimate(5, 1000, 4)
    assert (s.bit_errors, s.bits_total, s.trials) == (30, 2000, 8)


def test_ideal_high_snr_error_free():
    cfg = SystemConfig(B=8, U=4, modulation="16qam", seed=1)
    est = run_ber(cfg, 60.0, 16)
    assert est.bit_errors == 0 and est.bits_total == 16 * 4 * 32 * 4


def test_rayleigh_siso_oracle():
    # one antenna, one UE, unnormalized fading: BER = 1/2 (1 - sqrt(g/(1+g))), g = Eb/N0.
    # One channel use per draw keeps the bits (nearly) independent.
    cfg = SystemConfig(B=1, U=1, channel=RAYLEIGH, normalize=False, n_symbols=1, seed=5)
    gbar_db = 10.0
    est = run_ber(cfg, gbar_db + 10 * math.log10(2), 32768, batch_trials=8192)
    assert est.bits_total == 65536
    assert abs(est.ber - rayleigh_qpsk_ber(10 ** (gbar_db / 10))) <= 3 * est.std_err


def test_worker_count_does_not_change_result():
    cfg = SystemConfig(B=8, U=2, q=3, k=2, seed=9)
    a = run_ber(cfg, 6.0, 12, workers=1, batch_trials=4)
    b = run_ber(cfg, 6.0, 12, workers=3, batch_trials=4)
    c = run_ber(cfg, 6.0, 12, workers=1, batch_trials=12)
    assert a == b == c


def test_master_seed_overrides_config():
    cfg = SystemConfig(B=8, U=2, q=2, seed=0)
    assert run_ber(cfg, 4.0, 8, master_seed=3) == run_ber(cfg.with_(seed=3), 4.0, 8)


def test_invalid_trials():
    with pytest.raises(ConfigError):
        run_ber(SystemConfig(), 0.0, 0)


def test_ls_csi_runs_and_is_worse_than_perfect():
    cfg = SystemConfig(B=16, U=4, seed=2)
    perfect = run_ber(cfg, 0.0, 32)
    ls = run_ber(cfg.with_(csi="ls-pilot"), 0.0, 32)
    assert ls.ber >= perfect.ber


def test_infeasible_one_bit_many_users():
    cfg = SystemConfig(B=128, U=64, q=1, k=math.inf, modulation="16qam", seed=0)
    with pytest.raises(InfeasibleError) as exc:
        min_snr_for_target(cfg, FAST)
    assert exc.value.floor_ber > 0.01


def test_bracket_and_target():
    cfg = SystemConfig(B=16, U=4, q=3, k=3, seed=4)
    res = min_snr_for_target(cfg, FAST)
    probes = {p.snr_db: p for p in res.probes}
    assert probes[round(res.min_snr_db, 9)].ber <= 0.01
    below = [p for p in res.probes if p.snr_db < res.min_snr_db]
    assert below[-1].ber > 0.01
    assert res.min_snr_db - below[-1].snr_db <= FAST.tol_db + 1e-9
    assert not res.clamped


def test_self_reference_loss_is_zero():
    cfg = SystemConfig(B=8, U=2, seed=1)
    assert snr_loss(cfg, cfg, FAST) == 0.0
    assert snr_loss(cfg.ideal(), None, FAST) == 0.0


def test_loss_invariant_to_es():
    cfg = SystemConfig(B=8, U=2, q=3, k=2, B_prime=7, seed=1)
    a = snr_loss(cfg, None, FAST)
    b = snr_loss(cfg.with_(Es=4.0), None, FAST)
    assert a == b


def test_reference_must_share_scenario():
    with pytest.raises(ConfigError):
        snr_loss(SystemConfig(U=2), SystemConfig(U=3), FAST)


def test_high_resolution_loss_small():
    cfg = SystemConfig(B=32, U=8, q=7, k=6, modulation="16qam", seed=2024)
    assert snr_loss(cfg) <= 0.1


def test_trial_budget():
    s = SearchSettings(min_trials=1, rel_precision=0.1, target_ber=0.01)
    cfg = SystemConfig(U=2, n_symbols=32)  # 128 bits per trial
    assert trial_budget(cfg, s) == math.ceil(9900 / 128)
    assert trial_budget(cfg, SearchSettings(min_trials=200)) == 200
    assert trial_budget(cfg, SearchSettings(min_trials=10**6, max_channel_uses=3200)) == 100


@settings(max_examples=6, deadline=None)
@given(
    st.sampled_from([1, 2, 3, 4, math.inf]),
    st.sampled_from([1, 3, math.inf]),
    st.floats(-4.0, 14.0),
    st.sampled_from(["los-ula", "iid-rayleigh"]),
)
def test_ber_monotone_in_snr(q, k, snr, kind):
    cfg = SystemConfig(B=16, U=2, q=q, k=k, channel=ChannelModelSpec(kind=kind), seed=11)
    lo = run_ber(cfg, snr, 32, batch_trials=32)
    hi = run_ber(cfg, snr + 2.0, 32, batch_trials=32)
    se = math.hypot(lo.std_err, hi.std_err)
    assert hi.ber <= lo.ber + 3 * se + 1e-12
