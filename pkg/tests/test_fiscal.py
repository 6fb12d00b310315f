"""Test fees, fee credits, incentive allocation, and the fiscal close.

:author: Shay Hill
:created: 2025-02-24
"""

from decimal import Decimal

import pytest
from conftest import funded_sheet
from hypothesis import given
from hypothesis import strategies as st

from intralayer_sim import fiscal, iassets
from intralayer_sim.comms import GuarantorStake
from intralayer_sim.core import BalanceSheet
from intralayer_sim.errors import (
    Expired,
    InsufficientBalance,
    IssuanceClosed,
    ReconciliationError,
    ResourceFloorBreached,
)
from intralayer_sim.fiscal import (
    BUDGET_COMPONENTS,
    INCENTIVE_CONSTRAINTS,
    BudgetVector,
    Candidate,
    CreditBook,
    CreditGrant,
    FeeCharge,
    FeeSchedule,
    FiscalParams,
    FiscalPoint,
    FiscalState,
    IncentiveBound,
    IncentivePlan,
    RevenueVector,
    acquire_agents,
    allocate_incentives,
    close_epoch,
    collect_fee,
    fiscal_objective,
    guarantor_incentives,
    issue_fee_credits,
    open_books,
    staking_rewards,
)
from intralayer_sim.globs import ACQUISITION, DFMM, NOL_KE, NOL_VC, OPERATORS, TREASURY, VAULT
from intralayer_sim.iassets import IAssetBook
from intralayer_sim.liquidity import NoLPortfolio
from intralayer_sim.type_hints import Account, Underlying

PRICES = {"HUB": Decimal(1), "ETH": Decimal(2000)}


def _state(
    *, phase_end: int = 2, gamma: int = 0, **caps: int
) -> tuple[FiscalState, BalanceSheet]:
    sheet = funded_sheet(
        (TREASURY, "hub", "HUB", 10000),
        ("alice", "hub", "HUB", 100),
        ("bob", "hub", "HUB", 100),
        (DFMM, "hub", "HUB", 100000),
        (DFMM, "hub", "ETH", 50),
    )
    for owner in (NOL_VC, NOL_KE):
        _ = sheet.open(owner, "hub")
    params = FiscalParams(
        hub="HUB",
        hub_chain="hub",
        caps={k: (Decimal(v),) for k, v in caps.items()},
        gamma=(Decimal(gamma),),
        nol_share=Decimal("0.2"),
        nol_ke_fraction=Decimal("0.5"),
        phase_end=phase_end,
    )
    state = FiscalState(
        params,
        CreditBook(2, phase_end),
        vc=NoLPortfolio(NOL_VC, "hub", "HUB"),
        ke=NoLPortfolio(NOL_KE, "hub", "HUB"),
    )
    _ = open_books(state, sheet, PRICES)
    return state, sheet


def _charge(state: FiscalState, sheet: BalanceSheet, agent: str, service: str, amount: int, epoch: int) -> FeeCharge:
    fee = collect_fee(
        sheet,
        state.credits,
        agent=agent,
        service=service,  # pyright: ignore[reportArgumentType]
        amount=Decimal(amount),
        epoch=epoch,
        hub="HUB",
        hub_chain="hub",
    )
    state.fees.append(fee)
    return fee


def _close(state: FiscalState, sheet: BalanceSheet, epoch: int, **kwargs: object):
    return close_epoch(
        state,
        sheet,
        IAssetBook(sheet),
        epoch=epoch,
        prices=PRICES,
        stakes=kwargs.get("stakes", ()),  # pyright: ignore
        receivables=Decimal(0),
        demand={"ETH": Decimal(1)},
        candidates=kwargs.get("candidates", ()),  # pyright: ignore
    )


class TestVectors:
    def test_budget_needs_every_component(self):
        with pytest.raises(ValueError):
            _ = BudgetVector({"S_DC": Decimal(1)})

    def test_budget_total(self):
        components = dict.fromkeys(BUDGET_COMPONENTS, Decimal(1))
        assert BudgetVector(components).total == len(BUDGET_COMPONENTS)

    def test_revenue_from_fees(self):
        fees = [FeeCharge("a", "DC", Decimal(2)), FeeCharge("b", "DC", Decimal(3), Decimal(1))]
        revenue = RevenueVector.from_fees(fees)
        assert revenue.streams["NF_DC"] == 5
        assert revenue.total == 5

    def test_fee_schedule(self):
        schedule = FeeSchedule({"VT": (Decimal(1), Decimal(2))})
        assert schedule.rate("VT", 1) == 1
        assert schedule.rate("VT", 7) == 2
        assert schedule.rate("DC", 1) == 0

    def test_incentive_weights_sum_to_one(self):
        with pytest.raises(ValueError):
            _ = IncentivePlan((Decimal(0), Decimal(0)), {"ETH": Decimal("0.5")})


class TestCredits:
    def test_oldest_first_and_expiry(self):
        book = CreditBook(ttl=2, phase_end=5)
        book.issue("a", Decimal(3), 1)
        book.issue("a", Decimal(4), 2)
        assert book.apply("a", Decimal(5), 2) == 5
        assert [g.amount for g in book.grants] == [0, 2]
        assert book.balance("a", 4) == 2
        assert book.balance("a", 5) == 0

    def test_no_issuance_after_bootstrap(self):
        book = CreditBook(ttl=2, phase_end=1)
        with pytest.raises(IssuanceClosed):
            book.issue("a", Decimal(1), 2)

    def test_expired_grant(self):
        grant = CreditGrant("a", Decimal(1), 1, 2)
        with pytest.raises(Expired):
            _ = grant.draw(Decimal(1), 3)

    def test_issue_in_proportion_to_usage(self):
        book = CreditBook(ttl=2, phase_end=3)
        usage = {"a": Decimal(1), "b": Decimal(2)}
        grants = issue_fee_credits(book, Decimal(30), usage, 1)
        assert grants == {"a": Decimal(10), "b": Decimal(20)}
        assert book.balance("b", 2) == 20
        with pytest.raises(IssuanceClosed):
            _ = issue_fee_credits(book, Decimal(30), usage, 4)

    def test_expire_drops_dead_grants(self):
        book = CreditBook(ttl=1, phase_end=5)
        book.issue("a", Decimal(3), 1)
        assert book.expire(2) == 3
        assert book.grants == []

    def test_credits_cover_dc_not_vt(self):
        state, sheet = _state()
        state.credits.issue("alice", Decimal(10), 0)
        dc = _charge(state, sheet, "alice", "DC", 4, 1)
        vt = _charge(state, sheet, "alice", "VT", 4, 1)
        assert (dc.credit, dc.cash) == (4, 0)
        assert (vt.credit, vt.cash) == (0, 4)
        assert sheet.balance(Account("alice", "hub"), "HUB") == 96

    def test_failed_fee_restores_credits(self):
        state, sheet = _state()
        state.credits.issue("alice", Decimal(10), 0)
        with pytest.raises(InsufficientBalance):
            _ = _charge(state, sheet, "alice", "DC", 500, 1)
        assert state.credits.balance("alice", 1) == 10


class TestAllocation:
    def test_incentives_split_by_demand(self):
        shares = allocate_incentives(Decimal(90), {"a": Decimal(1), "b": Decimal(2)})
        assert shares == {"a": Decimal(30), "b": Decimal(60)}

    def test_acquisition_is_greedy_within_budget(self):
        candidates = [
            Candidate("x", Decimal(30), Decimal(60)),
            Candidate("y", Decimal(30), Decimal(90)),
            Candidate("z", Decimal(10), Decimal(5)),
        ]
        picked = acquire_agents(Decimal(50), candidates)
        assert [c.id for c in picked] == ["y", "z"]

    @given(
        st.decimals(min_value=0, max_value=1000, places=2),
        st.lists(
            st.tuples(
                st.decimals(min_value=1, max_value=100, places=2),
                st.decimals(min_value=0, max_value=300, places=2),
            ),
            max_size=8,
        ),
    )
    def test_acquisition_respects_budget_and_value(
        self, budget: Decimal, pairs: list[tuple[Decimal, Decimal]]
    ):
        candidates = [Candidate(f"c{i}", c, v) for i, (c, v) in enumerate(pairs)]
        picked = acquire_agents(budget, candidates)
        assert sum(c.cost for c in picked) <= budget
        assert sum(c.value for c in picked) >= sum(c.cost for c in picked)

    def test_guarantor_incentives(self):
        stakes = [
            GuarantorStake("g1", "DC", {"ETH": Decimal(1)}),
            GuarantorStake("g2", "DC", {"ETH": Decimal(3), "HUB": Decimal(2000)}),
            GuarantorStake("g3", "VT", {"ETH": Decimal(100)}),
        ]
        per_asset, payouts = guarantor_incentives(Decimal(100), "DC", stakes, PRICES)
        assert per_asset == {"ETH": Decimal(80), "HUB": Decimal(20)}
        assert payouts == {"g1": Decimal(20), "g2": Decimal(80)}

    def test_no_stake_no_incentives(self):
        assert guarantor_incentives(Decimal(100), "PL", [], PRICES) == ({}, {})

    def test_staking_rewards_follow_holders(self):
        sheet = funded_sheet(("a", "eth", "ETH", 3), ("b", "eth", "ETH", 1))
        vault = sheet.open(VAULT, "eth")
        book = IAssetBook(sheet)
        underlying = Underlying("ETH", "eth")
        for holder, qty in (("a", 3), ("b", 1)):
            _ = sheet.post_entry(Account(holder, "eth"), vault, "ETH", Decimal(qty))
            book.record_deposit(holder, underlying, Decimal(qty))
            _ = iassets.mint(book, holder, underlying, Decimal(qty))
        weights, payouts = staking_rewards(Decimal(40), book, {}, PRICES)
        assert weights == {"ETH": Decimal(1)}
        assert payouts == {"a": Decimal(30), "b": Decimal(10)}


class TestClose:
    def test_recurrence_matches_ledger(self):
        state, sheet = _state(S_DC=100, Omega_DC=20, AA=50, fee_credits=30)
        _ = _charge(state, sheet, "alice", "DC", 10, 1)
        _ = _charge(state, sheet, "bob", "PL", 5, 1)
        report = _close(
            state,
            sheet,
            1,
            stakes=[GuarantorStake("g", "DC", {"ETH": Decimal(1)})],
            candidates=[
                Candidate("x", Decimal(30), Decimal(60)),
                Candidate("y", Decimal(30), Decimal(90)),
            ],
        )
        assert report.revenue.total == 15
        assert report.budget.components["VC_K"] == report.budget.components["KE_K"] == Decimal("1.5")
        assert report.budget.total == Decimal(153)
        assert report.delta_k == 3
        assert report.equity == report.recomputed == Decimal(9865)
        assert report.acquired == ("y",)
        assert report.credits_issued == {"alice": Decimal(20), "bob": Decimal(10)}
        assert sheet.balance(Account(OPERATORS, "hub"), "HUB") == 20
        assert sheet.balance(Account(ACQUISITION, "hub"), "HUB") == 30
        assert sheet.balance(Account("g", "hub"), "HUB") == 100
        assert state.fees == []

    def test_redeemed_credits_are_budget(self):
        state, sheet = _state(fee_credits=30)
        _ = _charge(state, sheet, "alice", "DC", 10, 1)
        _ = _close(state, sheet, 1)
        fee = _charge(state, sheet, "alice", "DC", 12, 2)
        assert fee.credit == 12
        report = _close(state, sheet, 2)
        assert report.budget.components["L_prime"] == 12
        assert report.equity == report.recomputed

    def test_budget_never_overdraws_treasury(self):
        state, sheet = _state(Omega_VT=10**9)
        report = _close(state, sheet, 1)
        assert report.budget.components["Omega_VT"] == 10000
        assert sheet.balance(state.treasury, "HUB") == 0
        assert report.equity == report.recomputed == 0

    def test_breach(self):
        state, sheet = _state(gamma=20000)
        report = _close(state, sheet, 1)
        assert report.breach
        assert report.as_record()["breach"] is True
        assert isinstance(report.floor_error, ResourceFloorBreached)
        assert "below Gamma 20000" in str(report.floor_error)

    def test_incentive_bounds(self):
        state, sheet = _state(S_DC=100, S_VT=40)
        stakes = [
            GuarantorStake("g", "DC", {"ETH": Decimal(1)}),
            GuarantorStake("h", "VT", {"ETH": Decimal(2)}),
        ]
        report = _close(state, sheet, 1, stakes=stakes)
        assert set(report.bounds) == set(INCENTIVE_CONSTRAINTS)
        assert report.bounds["S_DC"] == IncentiveBound("eq", Decimal(100), Decimal(100))
        assert report.bounds["S_VT"] == IncentiveBound("le", Decimal(40), Decimal(40))
        assert report.bounds["S_PL"] == IncentiveBound("le", Decimal(0), Decimal(0))
        assert report.as_record()["bounds"]["S_DC"]["constraint"] == "eq"

    @pytest.mark.parametrize(
        ("constraint", "paid", "holds"),
        [("eq", 10, True), ("eq", 9, False), ("le", 9, True), ("le", 11, False)],
    )
    def test_bound_holds(self, constraint: str, paid: int, holds: bool):
        bound = IncentiveBound(constraint, Decimal(10), Decimal(paid))  # pyright: ignore[reportArgumentType]
        assert bound.holds is holds

    def test_drift_from_books_raises(self, monkeypatch: pytest.MonkeyPatch):
        state, sheet = _state()
        books = fiscal.resources

        def off_by_one(*args: object, **kwargs: object) -> tuple[Decimal, Decimal]:
            recomputed, nol_value = books(*args, **kwargs)  # pyright: ignore[reportArgumentType]
            return recomputed + 1, nol_value

        monkeypatch.setattr(fiscal, "resources", off_by_one)
        with pytest.raises(ReconciliationError):
            _ = _close(state, sheet, 1)

    def test_matured_phase_issues_no_credits(self):
        state, sheet = _state(phase_end=0, fee_credits=30, L=50)
        _ = _charge(state, sheet, "alice", "DC", 10, 1)
        report = _close(state, sheet, 1)
        assert report.phase == "matured"
        assert report.credits_issued == {}
        assert report.budget.components["L"] == 0


class TestObjective:
    def test_penalizes_shortfall(self):
        points = [
            FiscalPoint(Decimal(10), Decimal(100), Decimal(60)),
            FiscalPoint(Decimal(-5), Decimal(0), Decimal(50)),
        ]
        assert fiscal_objective(points, Decimal("0.5")) == Decimal(10) - 20 - 5 + 25

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            _ = fiscal_objective([], Decimal(2))
