"""Deterministic Star Schema Benchmark data generator.

Value domains follow dbgen (regions, nations, cities, colours, brands,
dates, discounts, quantities); draws are uniform where dbgen's
distributions are not needed by the query selectivities.
"""

import logging
import math
from datetime import date, timedelta
from typing import Dict, List, Tuple

import numpy as np

from pim_olap_sim.config.logging import LoggingService
from pim_olap_sim.models.errors import ValidationFailure
from pim_olap_sim.models.store import Database
from pim_olap_sim.repositories.fixtures import load_schema
from pim_olap_sim.services.columnar_store import build_database

logger = logging.getLogger(__name__)
logging_service = LoggingService(__name__)

REGIONS = ("AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST")

# (name, region index)
NATIONS: Tuple[Tuple[str, int], ...] = (
    ("ALGERIA", 0), ("ARGENTINA", 1), ("BRAZIL", 1), ("CANADA", 1), ("EGYPT", 4),
    ("ETHIOPIA", 0), ("FRANCE", 3), ("GERMANY", 3), ("INDIA", 2), ("INDONESIA", 2),
    ("IRAN", 4), ("IRAQ", 4), ("JAPAN", 2), ("JORDAN", 4), ("KENYA", 0),
    ("MOROCCO", 0), ("MOZAMBIQUE", 0), ("PERU", 1), ("CHINA", 2), ("ROMANIA", 3),
    ("SAUDI ARABIA", 4), ("VIETNAM", 2), ("RUSSIA", 3), ("UNITED KINGDOM", 3), ("UNITED STATES", 1),
)

COLORS = (
    "almond", "antique", "aquamarine", "azure", "beige", "bisque", "black", "blanched", "blue",
    "blush", "brown", "burlywood", "burnished", "chartreuse", "chiffon", "chocolate", "coral",
    "cornflower", "cornsilk", "cream", "cyan", "dark", "deep", "dim", "dodger", "drab", "firebrick",
    "floral", "forest", "frosted", "gainsboro", "ghost", "goldenrod", "green", "grey", "honeydew",
    "hot", "indian", "ivory", "khaki", "lace", "lavender", "lawn", "lemon", "light", "lime", "linen",
    "magenta", "maroon", "medium", "metallic", "midnight", "mint", "misty", "moccasin", "navajo",
    "navy", "olive", "orange", "orchid", "pale", "papaya", "peach", "peru", "pink", "plum", "powder",
    "puff", "purple", "red", "rose", "rosy", "royal", "saddle", "salmon", "sandy", "seashell",
    "sienna", "sky", "slate", "smoke", "snow", "spring", "steel", "tan", "thistle", "tomato",
    "turquoise", "violet", "wheat", "white", "yellow",
)

TYPE_SIZES = ("STANDARD", "SMALL", "MEDIUM", "LARGE", "ECONOMY", "PROMO")
TYPE_FINISHES = ("ANODIZED", "BURNISHED", "PLATED", "POLISHED", "BRUSHED")
TYPE_MATERIALS = ("TIN", "NICKEL", "BRASS", "STEEL", "COPPER")
CONTAINER_SIZES = ("SM", "LG", "MED", "JUMBO", "WRAP")
CONTAINER_KINDS = ("CASE", "BOX", "BAG", "JAR", "PKG", "PACK", "CAN", "DRUM")
SEGMENTS = ("AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY")
PRIORITIES = ("1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECI", "5-LOW")
SHIP_MODES = ("AIR", "FOB", "MAIL", "RAIL", "REG AIR", "SHIP", "TRUCK")
HOLIDAYS = {(1, 1), (2, 14), (5, 31), (7, 4), (9, 6), (11, 25), (12, 24), (12, 25), (12, 31)}
ADDRESS_CHARS = np.array(list("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 ,"))

START_DATE = date(1992, 1, 1)
END_DATE = date(1998, 12, 31)
# orders are placed early enough for every commit date to stay inside the date table
ORDER_DATE_MARGIN = 151

CUSTOMERS_PER_SF = 30_000
SUPPLIERS_PER_SF = 2_000
PARTS_BASE = 200_000
ORDERS_PER_SF = 1_500_000
MAX_LINES = 7


def ssb_row_counts(scale_factor: float) -> Dict[str, int]:
    """Dimension and order cardinalities for a scale factor; part grows with log2(SF)."""
    if scale_factor <= 0:
        raise ValidationFailure(f"scale_factor must be > 0 (got {scale_factor})")
    parts = PARTS_BASE * int(math.floor(1 + math.log2(scale_factor))) if scale_factor >= 1 else PARTS_BASE
    return {
        "customer": max(1, int(CUSTOMERS_PER_SF * scale_factor)),
        "supplier": max(1, int(SUPPLIERS_PER_SF * scale_factor)),
        "part": parts,
        "orders": max(1, int(ORDERS_PER_SF * scale_factor)),
        "date": (END_DATE - START_DATE).days + 1,
    }


def _yyyymmdd(days: np.ndarray) -> np.ndarray:
    """Integer yyyymmdd keys for datetime64[D] values."""
    years = days.astype("datetime64[Y]").astype(np.int64) + 1970
    months = days.astype("datetime64[M]").astype(np.int64) % 12 + 1
    day = (days - days.astype("datetime64[M]")).astype(np.int64) + 1
    return years * 10_000 + months * 100 + day


def _selling_season(month: int) -> str:
    if month == 12:
        return "Christmas"
    if month in (1, 2):
        return "Winter"
    if month in (3, 4, 5):
        return "Spring"
    if month in (6, 7, 8):
        return "Summer"
    return "Fall"


def _date_table() -> Dict[str, List]:
    rows: Dict[str, List] = {name: [] for name in (
        "d_datekey", "d_date", "d_dayofweek", "d_month", "d_year", "d_yearmonthnum", "d_yearmonth",
        "d_daynuminweek", "d_daynuminmonth", "d_daynuminyear", "d_monthnuminyear", "d_weeknuminyear",
        "d_sellingseason", "d_lastdayinweekfl", "d_lastdayinmonthfl", "d_holidayfl", "d_weekdayfl",
    )}
    day = START_DATE
    while day <= END_DATE:
        tomorrow = day + timedelta(days=1)
        day_of_year = day.timetuple().tm_yday
        rows["d_datekey"].append(day.year * 10_000 + day.month * 100 + day.day)
        rows["d_date"].append(f"{day:%B} {day.day}, {day.year}")
        rows["d_dayofweek"].append(f"{day:%A}")
        rows["d_month"].append(f"{day:%B}")
        rows["d_year"].append(day.year)
        rows["d_yearmonthnum"].append(day.year * 100 + day.month)
        rows["d_yearmonth"].append(f"{day:%b}{day.year}")
        # Sunday is day 1
        rows["d_daynuminweek"].append(day.isoweekday() % 7 + 1)
        rows["d_daynuminmonth"].append(day.day)
        rows["d_daynuminyear"].append(day_of_year)
        rows["d_monthnuminyear"].append(day.month)
        rows["d_weeknuminyear"].append((day_of_year - 1) // 7 + 1)
        rows["d_sellingseason"].append(_selling_season(day.month))
        rows["d_lastdayinweekfl"].append(int(day.isoweekday() == 6))
        rows["d_lastdayinmonthfl"].append(int(tomorrow.month != day.month))
        rows["d_holidayfl"].append(int((day.month, day.day) in HOLIDAYS))
        rows["d_weekdayfl"].append(int(day.isoweekday() <= 5))
        day = tomorrow
    return rows


def _addresses(rng: np.random.Generator, n: int) -> List[str]:
    lengths = rng.integers(10, 26, size=n)
    chars = ADDRESS_CHARS[rng.integers(0, ADDRESS_CHARS.size, size=(n, 25))]
    return ["".join(row[:length]) for row, length in zip(chars.tolist(), lengths.tolist())]


def _phones(rng: np.random.Generator, nations: np.ndarray) -> List[str]:
    n = nations.size
    a = rng.integers(100, 1000, size=n)
    b = rng.integers(100, 1000, size=n)
    c = rng.integers(1000, 10_000, size=n)
    return [f"{nat + 10:02d}-{x}-{y}-{z}" for nat, x, y, z in zip(nations.tolist(), a.tolist(), b.tolist(), c.tolist())]


def _geography(rng: np.random.Generator, n: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nation index, city, nation name and region name columns."""
    nation_names = np.array([name for name, _ in NATIONS])
    region_names = np.array([REGIONS[region] for _, region in NATIONS])
    city_prefixes = np.array([name[:9].ljust(9) for name, _ in NATIONS])
    nations = rng.integers(0, len(NATIONS), size=n)
    digits = rng.integers(0, 10, size=n).astype(str)
    cities = np.char.add(city_prefixes[nations], digits)
    return nations, cities, nation_names[nations], region_names[nations]


def _customer_table(rng: np.random.Generator, n: int) -> Dict[str, List]:
    nations, cities, nation_names, region_names = _geography(rng, n)
    return {
        "c_custkey": np.arange(1, n + 1),
        "c_name": [f"Customer#{k:09d}" for k in range(1, n + 1)],
        "c_address": _addresses(rng, n),
        "c_city": cities,
        "c_nation": nation_names,
        "c_region": region_names,
        "c_phone": _phones(rng, nations),
        "c_mktsegment": np.array(SEGMENTS)[rng.integers(0, len(SEGMENTS), size=n)],
    }


def _supplier_table(rng: np.random.Generator, n: int) -> Dict[str, List]:
    nations, cities, nation_names, region_names = _geography(rng, n)
    return {
        "s_suppkey": np.arange(1, n + 1),
        "s_name": [f"Supplier#{k:09d}" for k in range(1, n + 1)],
        "s_address": _addresses(rng, n),
        "s_city": cities,
        "s_nation": nation_names,
        "s_region": region_names,
        "s_phone": _phones(rng, nations),
    }


def _part_table(rng: np.random.Generator, n: int) -> Dict[str, np.ndarray]:
    colors = np.array(COLORS)
    first = rng.integers(0, len(COLORS), size=n)
    second = rng.integers(0, len(COLORS), size=n)
    mfgr = rng.integers(1, 6, size=n).astype(str)
    category = np.char.add(mfgr, rng.integers(1, 6, size=n).astype(str))
    brand = np.char.add(category, rng.integers(1, 41, size=n).astype(str))
    types = np.array([f"{s} {f} {m}" for s in TYPE_SIZES for f in TYPE_FINISHES for m in TYPE_MATERIALS])
    containers = np.array([f"{s} {k}" for s in CONTAINER_SIZES for k in CONTAINER_KINDS])
    return {
        "p_partkey": np.arange(1, n + 1),
        "p_name": np.char.add(np.char.add(colors[first], " "), colors[second]),
        "p_mfgr": np.char.add("MFGR#", mfgr),
        "p_category": np.char.add("MFGR#", category),
        "p_brand1": np.char.add("MFGR#", brand),
        "p_color": colors[first],
        "p_type": types[rng.integers(0, types.size, size=n)],
        "p_size": rng.integers(1, 51, size=n),
        "p_container": containers[rng.integers(0, containers.size, size=n)],
    }


def retail_price_cents(partkeys: np.ndarray) -> np.ndarray:
    """dbgen's retail price formula, in cents."""
    return 90_000 + (partkeys // 10) % 20_001 + 100 * (partkeys % 1_000)


def _lineorder_table(rng: np.random.Generator, counts: Dict[str, int]) -> Dict[str, np.ndarray]:
    orders = counts["orders"]
    lines = rng.integers(1, MAX_LINES + 1, size=orders)
    order_index = np.repeat(np.arange(orders), lines)
    total = int(order_index.size)
    line_start = np.cumsum(lines) - lines
    linenumber = np.arange(total) - np.repeat(line_start, lines) + 1

    first_day = np.datetime64(START_DATE.isoformat(), "D")
    order_days = first_day + rng.integers(0, counts["date"] - ORDER_DATE_MARGIN, size=orders)
    order_days = order_days[order_index]

    custkey = rng.integers(1, counts["customer"] + 1, size=orders)[order_index]
    priority = np.array(PRIORITIES)[rng.integers(0, len(PRIORITIES), size=orders)][order_index]
    partkey = rng.integers(1, counts["part"] + 1, size=total)
    suppkey = rng.integers(1, counts["supplier"] + 1, size=total)
    quantity = rng.integers(1, 51, size=total)
    discount = rng.integers(0, 11, size=total)
    tax = rng.integers(0, 9, size=total)
    supplycost = rng.integers(10_000, 100_001, size=total)
    commit_days = order_days + rng.integers(30, 91, size=total)
    shipmode = np.array(SHIP_MODES)[rng.integers(0, len(SHIP_MODES), size=total)]

    extendedprice = quantity * retail_price_cents(partkey)
    revenue = extendedprice * (100 - discount) // 100
    order_totals = np.bincount(order_index, weights=extendedprice, minlength=orders).astype(np.int64)

    return {
        "lo_orderkey": order_index + 1,
        "lo_linenumber": linenumber,
        "lo_custkey": custkey,
        "lo_partkey": partkey,
        "lo_suppkey": suppkey,
        "lo_orderdate": _yyyymmdd(order_days),
        "lo_orderpriority": priority,
        "lo_shippriority": np.zeros(total, dtype=np.int64),
        "lo_quantity": quantity,
        "lo_extendedprice": extendedprice,
        "lo_ordtotalprice": order_totals[order_index],
        "lo_discount": discount,
        "lo_revenue": revenue,
        "lo_supplycost": supplycost,
        "lo_tax": tax,
        "lo_commitdate": _yyyymmdd(commit_days),
        "lo_shipmode": shipmode,
    }


def generate_ssb(scale_factor: float, seed: int = 7) -> Database:
    """Generate and encode an SSB database; identical output for identical arguments.

    Args:
        scale_factor: SSB scale factor (> 0); lineorder has about 6,000,000 x SF rows
        seed: Seed of the numpy generator

    Returns:
        Encoded Database over the packaged ``ssb`` schema

    Raises:
        ValidationFailure: If scale_factor is not positive
    """
    counts = ssb_row_counts(scale_factor)
    rng = np.random.default_rng(seed)
    try:
        data = {
            "date": _date_table(),
            "customer": _customer_table(rng, counts["customer"]),
            "supplier": _supplier_table(rng, counts["supplier"]),
            "part": _part_table(rng, counts["part"]),
        }
        data["lineorder"] = _lineorder_table(rng, counts)
        db = build_database(load_schema("ssb"), data)
    except Exception as e:
        logging_service.log_error("SSB generation failed", e, operation="generate_ssb", scale_factor=scale_factor)
        raise

    logging_service.log_step(
        "generate_ssb",
        True,
        scale_factor=scale_factor,
        seed=seed,
        rows=db.row_counts(),
    )
    return db
