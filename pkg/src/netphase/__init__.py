"""Network traffic as header-parameter time series: pcap decoding, binning,
delay embedding and false-neighbour dimension estimates, occupancy novelty,
and a signature rule engine run across several averaging windows."""

from .capture import DecodedPacket, decode_packet, iter_decoded, read_capture, write_capture
from .monitor import WindowConfig, WindowSpec, run_monitor
from .params import ParamId, extract_params, param_catalog
from .series import TimeSeries, bin_series, boxcar_average

__all__ = [
    "DecodedPacket",
    "ParamId",
    "TimeSeries",
    "WindowConfig",
    "WindowSpec",
    "bin_series",
    "boxcar_average",
    "decode_packet",
    "extract_params",
    "iter_decoded",
    "param_catalog",
    "read_capture",
    "run_monitor",
    "write_capture",
]
