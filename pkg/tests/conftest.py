"""Shared fixtures: DRAM configuration, a small SSB store and a hand-sized TPC-H database."""

from datetime import date

import numpy as np
import pytest

from pim_olap_sim.config.settings import load_dram_config
from pim_olap_sim.repositories.fixtures import load_schema, load_workload
from pim_olap_sim.services.columnar_store import EPOCH, build_database
from pim_olap_sim.services.ssb_generator import generate_ssb


NATION_NAMES = (
    "ALGERIA", "ARGENTINA", "BRAZIL", "CANADA", "EGYPT", "ETHIOPIA", "FRANCE", "GERMANY", "INDIA",
    "INDONESIA", "IRAN", "IRAQ", "JAPAN", "JORDAN", "KENYA", "MOROCCO", "MOZAMBIQUE", "PERU",
    "CHINA", "ROMANIA", "SAUDI ARABIA", "VIETNAM", "RUSSIA", "UNITED KINGDOM", "UNITED STATES",
)
NATION_REGIONS = (0, 1, 1, 1, 4, 0, 3, 3, 2, 2, 4, 4, 2, 4, 0, 0, 0, 1, 2, 3, 4, 2, 3, 3, 1)


def _days(value: date) -> int:
    return (value - EPOCH).days


def tpch_tables(seed: int = 11) -> dict:
    """Raw column data for a few hundred lineitems with valid foreign keys everywhere."""
    rng = np.random.default_rng(seed)

    def pick(options, n):
        return [options[i] for i in rng.integers(0, len(options), size=n)]

    customers, suppliers, parts, orders = 30, 10, 40, 120
    lines = rng.integers(1, 5, size=orders)
    order_index = np.repeat(np.arange(orders), lines)
    total = int(order_index.size)
    linenumber = np.arange(total) - np.repeat(np.cumsum(lines) - lines, lines) + 1
    order_dates = _days(date(1993, 1, 1)) + rng.integers(0, 4 * 365, size=orders)
    ship_dates = order_dates[order_index] + rng.integers(1, 121, size=total)

    return {
        "region": {
            "r_regionkey": list(range(5)),
            "r_name": ["AFRICA", "AMERICA", "ASIA", "EUROPE", "MIDDLE EAST"],
            "r_comment": [f"region {i}" for i in range(5)],
        },
        "nation": {
            "n_nationkey": list(range(25)),
            "n_name": list(NATION_NAMES),
            "n_regionkey": list(NATION_REGIONS),
            "n_comment": [f"nation {i}" for i in range(25)],
        },
        "supplier": {
            "s_suppkey": list(range(1, suppliers + 1)),
            "s_name": [f"Supplier#{k:09d}" for k in range(1, suppliers + 1)],
            "s_address": [f"{k} supply road" for k in range(1, suppliers + 1)],
            "s_nationkey": pick([6, 7, 8, 12], suppliers),
            "s_phone": [f"16-555-{k:04d}" for k in range(1, suppliers + 1)],
            "s_acctbal": rng.integers(-99_999, 999_999, size=suppliers),
            "s_comment": pick(["quick", "slow", "steady"], suppliers),
        },
        "customer": {
            "c_custkey": list(range(1, customers + 1)),
            "c_name": [f"Customer#{k:09d}" for k in range(1, customers + 1)],
            "c_address": [f"{k} market street" for k in range(1, customers + 1)],
            "c_nationkey": pick([6, 7, 8, 12, 24], customers),
            "c_phone": [f"17-555-{k:04d}" for k in range(1, customers + 1)],
            "c_acctbal": rng.integers(-99_999, 999_999, size=customers),
            "c_mktsegment": pick(["AUTOMOBILE", "BUILDING", "FURNITURE", "HOUSEHOLD", "MACHINERY"], customers),
            "c_comment": [f"customer note {k % 7}" for k in range(1, customers + 1)],
        },
        "part": {
            "p_partkey": list(range(1, parts + 1)),
            "p_name": [f"part {k}" for k in range(1, parts + 1)],
            "p_mfgr": pick(["Manufacturer#1", "Manufacturer#2", "Manufacturer#3"], parts),
            "p_brand": pick(["Brand#12", "Brand#23", "Brand#34", "Brand#45"], parts),
            "p_type": pick(["PROMO BRUSHED TIN", "STANDARD PLATED STEEL", "PROMO ANODIZED BRASS", "ECONOMY POLISHED COPPER"], parts),
            "p_size": rng.integers(1, 21, size=parts),
            "p_container": pick(["SM CASE", "LG BOX", "MED BAG", "JUMBO PKG"], parts),
            "p_retailprice": rng.integers(90_000, 200_000, size=parts),
            "p_comment": pick(["plain", "fancy"], parts),
        },
        "orders": {
            "o_orderkey": list(range(1, orders + 1)),
            "o_custkey": rng.integers(1, customers + 1, size=orders),
            "o_orderstatus": pick(["F", "O", "P"], orders),
            "o_totalprice": rng.integers(100_000, 50_000_000, size=orders),
            "o_orderdate": order_dates,
            "o_orderpriority": pick(["1-URGENT", "2-HIGH", "3-MEDIUM", "4-NOT SPECIFIED", "5-LOW"], orders),
            "o_clerk": [f"Clerk#{k % 9:09d}" for k in range(orders)],
            "o_shippriority": np.zeros(orders, dtype=np.int64),
            "o_comment": pick(["regular", "express"], orders),
        },
        "lineitem": {
            "l_orderkey": order_index + 1,
            "l_partkey": rng.integers(1, parts + 1, size=total),
            "l_suppkey": rng.integers(1, suppliers + 1, size=total),
            "l_linenumber": linenumber,
            "l_quantity": rng.integers(1, 51, size=total) * 100,
            "l_extendedprice": rng.integers(100_000, 10_000_000, size=total),
            "l_discount": rng.integers(0, 11, size=total),
            "l_tax": rng.integers(0, 9, size=total),
            "l_returnflag": pick(["A", "N", "R"], total),
            "l_linestatus": pick(["F", "O"], total),
            "l_shipdate": ship_dates,
            "l_commitdate": ship_dates + rng.integers(-30, 31, size=total),
            "l_receiptdate": ship_dates + rng.integers(1, 31, size=total),
            "l_shipinstruct": pick(["DELIVER IN PERSON", "COLLECT COD", "NONE", "TAKE BACK RETURN"], total),
            "l_shipmode": pick(["MAIL", "SHIP", "AIR", "TRUCK"], total),
            "l_comment": pick(["careful", "final", "pending"], total),
        },
    }


@pytest.fixture(scope="session")
def cfg():
    """Packaged DDR4 configuration."""
    return load_dram_config()


@pytest.fixture(scope="session")
def ssb_db():
    """SSB at scale factor 0.01 with the default seed."""
    return generate_ssb(0.01, 7)


@pytest.fixture(scope="session")
def ssb_workload():
    return load_workload("ssb")


@pytest.fixture(scope="session")
def tpch_db():
    return build_database(load_schema("tpch"), tpch_tables())


@pytest.fixture(scope="session")
def tpch_workload():
    return load_workload("tpch")
