"""Published reference numbers the package is checked against (EUR/kWh unless noted)."""

# (upper limit kWp, scp, feed-in) for the 19 TEL-2021 PV remuneration schemes
PV_SCHEME_TABLE_2021 = [
    (10, 0.0379, 0.0856),
    (15, 0.0374, 0.0851),
    (20, 0.0367, 0.0846),
    (25, 0.0364, 0.0843),
    (30, 0.0362, 0.0841),
    (35, 0.0360, 0.0840),
    (40, 0.0359, 0.0839),
    (45, 0.0352, 0.0828),
    (50, 0.0340, 0.0811),
    (55, 0.0330, 0.0797),
    (60, 0.0322, 0.0785),
    (65, 0.0315, 0.0775),
    (70, 0.0309, 0.0767),
    (75, 0.0304, 0.0760),
    (80, 0.0300, 0.0753),
    (85, 0.0296, 0.0748),
    (90, 0.0293, 0.0743),
    (95, 0.0290, 0.0738),
    (100, 0.0287, 0.0735),
]

# year -> (landlord, tenant, gas, CO2 EUR/t)
CONSUMER_PRICES = {
    2021: (0.2973, 0.3293, 0.0633, 25),
    2022: (0.3033, 0.3359, 0.0654, 30),
    2023: (0.3094, 0.3426, 0.0676, 35),
    2024: (0.3155, 0.3494, 0.0709, 45),
    2025: (0.3219, 0.3564, 0.0741, 55),
    2026: (0.3283, 0.3635, 0.0754, 55),
    2027: (0.3349, 0.3708, 0.0766, 55),
    2028: (0.3416, 0.3782, 0.0780, 55),
    2029: (0.3484, 0.3858, 0.0793, 55),
    2030: (0.3554, 0.3935, 0.0827, 65),
    2031: (0.3625, 0.4014, 0.0841, 65),
    2032: (0.3697, 0.4094, 0.0855, 65),
    2033: (0.3771, 0.4176, 0.0869, 65),
    2034: (0.3846, 0.4260, 0.0884, 65),
    2035: (0.3923, 0.4345, 0.0919, 75),
    2036: (0.4002, 0.4432, 0.0935, 75),
    2037: (0.4082, 0.4520, 0.0950, 75),
    2038: (0.4164, 0.4611, 0.0966, 75),
    2039: (0.4247, 0.4703, 0.0983, 75),
    2040: (0.4332, 0.4797, 0.0999, 75),
}

# per-kWh CHP earnings inputs (EUR/kWh) and results
CHP_EARNINGS_TENANT_PRICE = 0.3103
CHP_EARNINGS = {"feedIn": 0.1033, "tenant": 0.2128, "heatPump": 0.2579}
CHP_EARNINGS_COP = 3.5

CHP_EMISSION_FACTOR = 313.0

# building name -> (el MWh/a, heat MWh/a, roof m2)
BUILDINGS = {
    "building-1": (29.8, 113.0, 176.0),
    "building-2": (31.5, 100.9, 166.8),
    "building-3": (31.5, 58.0, 125.6),
    "building-4": (30.0, 40.4, 125.6),
}
