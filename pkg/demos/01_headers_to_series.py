"""From packets to a header time series.

Builds a small capture in memory, decodes it, pulls out the static header
parameters and bins the IP length into a 1-second series.
"""

import io

from netphase import ParamId, bin_series, boxcar_average, extract_params, iter_decoded, write_capture
from netphase.craft import int_to_ip
from netphase.traffic import benign_capture

records = benign_capture(n_packets=400, duration=60.0, seed=1)
buf = io.BytesIO()
write_capture(buf, records)
print(f"wrote {len(records)} packets, {len(buf.getvalue())} bytes of pcap")

samples = []
for i, rec, pkt, err in iter_decoded(buf.getvalue()):
    if err is not None:
        print(f"packet {i} did not decode: {err}")
        continue
    samples.extend(extract_params(pkt))

first = [s for s in samples if s.time == samples[0].time]
print("\nparameters of the first packet:")
for s in first:
    shown = int_to_ip(s.value) if s.param in (ParamId.IP_SRC, ParamId.IP_DST) else s.value
    print(f"  {ParamId(s.param).name:<10} {shown}")

lengths = [s for s in samples if s.param == ParamId.IP_LENGTH]
series = bin_series(lengths, tau=1.0, aggregation="mean")
smooth = boxcar_average(series, 5)
print(f"\nIP length: {len(series)} one-second bins, {len(smooth)} after a 5-bin boxcar")
print("raw     ", " ".join(f"{v:6.1f}" for v in series.values[:10]))
print("averaged", " ".join(f"{v:6.1f}" for v in smooth.values[:10]))
print(f"variance {series.values.var():.1f} -> {smooth.values.var():.1f}")
