"""Coupling constructions: finite measures, anchored couplings and block samplers."""

from .blocks import (BlockCoupler, BlockLayout, BlockSample, WindowCoupler, WindowSample,
                     build_xbar, build_xhat_pair, couple_block_oriented,
                     couple_block_unoriented, couple_exterior, couple_window)
from .lemmas import (CouplingOutcome, IntervalCoupler, SequentialCoupler, couple_partitioned,
                     couple_single, feasibility_partitioned, feasibility_single, joint_audit,
                     make_coupler)
from .measures import FiniteMeasure, FinitePair, ProductBernoulli, ProductPair
from .search import SearchReport, Witness, search_counterexample

__all__ = ["BlockCoupler", "BlockLayout", "BlockSample", "WindowCoupler", "WindowSample",
           "build_xbar", "build_xhat_pair", "couple_block_oriented", "couple_block_unoriented",
           "couple_exterior", "couple_window", "CouplingOutcome", "IntervalCoupler",
           "SequentialCoupler", "couple_partitioned", "couple_single",
           "feasibility_partitioned", "feasibility_single", "joint_audit", "make_coupler",
           "FiniteMeasure", "FinitePair", "ProductBernoulli", "ProductPair", "SearchReport",
           "Witness", "search_counterexample"]
