"""
Preparing listening stimuli and measuring echo attenuation
==========================================================

Walks the signal side of the pipeline: synthesize loopback and
processed-output recordings, assemble the three scenario stimuli, and
score two toy echo cancellers with the attenuation metric.
"""

import numpy as np

from echoeval.audio import AudioBuffer, delay
from echoeval.metrics import erle, erle_framewise
from echoeval.scales import Scenario
from echoeval.stimulus import (
    ScenarioInputs,
    prepare_double_talk,
    prepare_far_end_single_talk,
    prepare_near_end_single_talk,
    undo_gain,
)

RATE = 16000
rng = np.random.default_rng(0)

# Stand-ins for real recordings: r_in is what the far end played into the
# call (the loopback reference), s_out is what the device sent back after
# its echo canceller ran.
r_in = AudioBuffer(rng.uniform(-0.6, 0.6, 2 * RATE), RATE)
speech = AudioBuffer(rng.uniform(-0.6, 0.6, 2 * RATE), RATE)

# A "good" canceller leaves 1% of the echo behind, a "bad" one 30%.
good_residual = AudioBuffer(r_in.samples * 0.01, RATE)
bad_residual = AudioBuffer(r_in.samples * 0.30, RATE)

print("echo return loss enhancement, full signal:")
print(f"  good canceller: {erle(r_in, good_residual):6.2f} dB")
print(f"  bad canceller:  {erle(r_in, bad_residual):6.2f} dB")

# The framewise variant gates out frames where the reference itself is
# quiet, so silences do not dilute the average. Mute the second half of
# the reference to see the gate in action.
gappy = r_in.samples.copy()
gappy[RATE:] = 0.0
gappy_ref = AudioBuffer(gappy, RATE)
gappy_res = AudioBuffer(gappy * 0.01, RATE)
fw = erle_framewise(gappy_ref, gappy_res)
active = sum(fw.active)
print(f"  framewise on a half-silent reference: {active}/{len(fw.active)} frames active,"
      f" mean {fw.mean_db:.2f} dB")

# Scenario stimuli. Near-end single talk is the processed speech as-is;
# far-end single talk mixes the reference with the 600 ms delayed output
# (rescaled if the sum would clip, with the gain recorded); double talk
# is stereo with the sidetone in one ear and the delayed echo in the other.
ne = prepare_near_end_single_talk(
    ScenarioInputs(r_in=r_in, s_out=speech, scenario=Scenario.NEAR_END_SINGLE_TALK)
)
fe = prepare_far_end_single_talk(
    ScenarioInputs(r_in=r_in, s_out=bad_residual, scenario=Scenario.FAR_END_SINGLE_TALK)
)
dt = prepare_double_talk(
    ScenarioInputs(r_in=r_in, s_out=speech, scenario=Scenario.DOUBLE_TALK)
)

print("\nstimulus layouts:")
print(f"  near-end:  {ne.audio.n_frames} frames, delay {ne.delay_ms:.0f} ms")
print(f"  far-end:   {fe.audio.n_frames} frames, delay {fe.delay_ms:.0f} ms,"
      f" mix gain {fe.applied_gain:.3f}")
print(f"  double:    {dt.audio.n_frames} frames x {dt.audio.channels} channels,"
      f" per-ear gains {dt.channel_gains}")

# The recorded gain makes the far-end mix reversible: divide it back out
# and the delayed echo drops out exactly, leaving the reference.
raw = undo_gain(fe)
echo = delay(bad_residual, 0.6).samples
recovered = raw.copy()
recovered[: len(echo)] -= echo
err = float(np.max(np.abs(recovered[: r_in.n_frames] - r_in.samples)))
print(f"\nreference recovered from the far-end mix, max error {err:.2e}")
