"""Demo code assignments for the built-in logics.

Code allocation would belong to a registry authority in a real deployment;
these are fixed here so traces and golden tests stay stable.
"""

from ..codec import CODE_MAX

NFV_CODE = 0x0000000001
ICN_CODE = 0x0000000002
VPN_CODE = 0x0000000003
OPAQUE_DEMO_CODE = CODE_MAX  # top of the code space
