"""Uniform-price call auction: order collection, clearing, settlement.

Each good clears once per round with a k-double-auction rule: orders expand to
unit lots, k is the largest volume at which the k-th highest bid still meets
the k-th lowest ask, and everything trades at the midpoint of that marginal
pair. Price ties break by arrival order. The best ask is reported every round
whether or not anything trades, because the ask series is the valuation
metric downstream.

Sellers reprice multiplicatively: selling out raises the ask, a silent round
lowers it (floored at a fraction of base price), partial sales leave it alone.
In fixed-price mode the ask never moves from the good's base price.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .events import ContractViolation


@dataclass(frozen=True)
class Order:
    agent_id: str
    good_id: str
    side: str  # "Bid" | "Ask"
    price: float
    quantity: int
    round_index: int
    arrival_index: int

    def __post_init__(self):
        if self.side not in ("Bid", "Ask"):
            raise ContractViolation(f"order side must be Bid or Ask, got {self.side!r}")
        if self.price <= 0:
            raise ContractViolation("order price must be positive")
        if self.quantity < 1:
            raise ContractViolation("order quantity must be at least 1")


@dataclass(frozen=True)
class Trade:
    buyer_id: str
    seller_id: str
    quantity: int
    price: float


@dataclass
class ClearingResult:
    good_id: str
    clearing_price: Optional[float]
    trades: list[Trade]
    best_ask: Optional[float]
    best_bid: Optional[float]
    executed_volume: int
    demand_units: int = 0
    supply_units: int = 0


@dataclass
class SellerState:
    seller_id: str
    good_id: str
    current_ask: float
    inventory: int
    fixed_price_mode: bool = False
    base_price: float = 0.0
    revenue: float = 0.0
    offered_this_round: int = 0
    # Day-level tallies: sellers reprice once per trading day on the
    # aggregate outcome, so a thin market does not decay five times a day.
    offered_today: int = 0
    sold_today: int = 0

    def __post_init__(self):
        if self.current_ask < 0:
            raise ContractViolation("ask must be non-negative")

    def start_day(self, stock: int) -> None:
        self.inventory = stock
        self.offered_today = stock
        self.sold_today = 0


def clear_round(book: Sequence[Order]) -> ClearingResult:
    """Clear one good's order book for one round.

    Volume is the largest k such that the k-th highest bid unit is priced at
    or above the k-th lowest ask unit; those k units trade at the midpoint of
    that marginal bid/ask pair. With k = 0 the result still reports the best
    bid and ask seen this round.
    """
    if not book:
        return ClearingResult(good_id="", clearing_price=None, trades=[],
                              best_ask=None, best_bid=None, executed_volume=0)
    good_ids = {o.good_id for o in book}
    if len(good_ids) > 1:
        raise ContractViolation(f"mixed good ids in one book: {sorted(good_ids)}")
    rounds = {o.round_index for o in book}
    if len(rounds) > 1:
        raise ContractViolation(f"mixed round indices in one book: {sorted(rounds)}")
    good_id = book[0].good_id

    bid_units: list[tuple[float, int, str]] = []  # (price, arrival, agent)
    ask_units: list[tuple[float, int, str]] = []
    for o in book:
        target = bid_units if o.side == "Bid" else ask_units
        for _ in range(o.quantity):
            target.append((o.price, o.arrival_index, o.agent_id))
    bid_units.sort(key=lambda u: (-u[0], u[1]))
    ask_units.sort(key=lambda u: (u[0], u[1]))

    best_bid = bid_units[0][0] if bid_units else None
    best_ask = ask_units[0][0] if ask_units else None

    k = 0
    while k < len(bid_units) and k < len(ask_units) and bid_units[k][0] >= ask_units[k][0]:
        k += 1

    if k == 0:
        return ClearingResult(good_id=good_id, clearing_price=None, trades=[],
                              best_ask=best_ask, best_bid=best_bid, executed_volume=0,
                              demand_units=len(bid_units), supply_units=len(ask_units))

    clearing_price = (bid_units[k - 1][0] + ask_units[k - 1][0]) / 2.0
    trades: list[Trade] = []
    for i in range(k):
        buyer = bid_units[i][2]
        seller = ask_units[i][2]
        if trades and trades[-1].buyer_id == buyer and trades[-1].seller_id == seller:
            trades[-1] = replace(trades[-1], quantity=trades[-1].quantity + 1)
        else:
            trades.append(Trade(buyer_id=buyer, seller_id=seller, quantity=1,
                                price=clearing_price))
    return ClearingResult(good_id=good_id, clearing_price=clearing_price, trades=trades,
                          best_ask=best_ask, best_bid=best_bid, executed_volume=k,
                          demand_units=len(bid_units), supply_units=len(ask_units))


def max_volume_oracle(book: Sequence[Order]) -> int:
    """Exhaustive reference: max over candidate prices p of min(demand(p), supply(p)).

    Demand counts bid units priced at or above p; supply counts ask units at
    or below p. Kept brute force on purpose as the independent check for
    clear_round.
    """
    bid_units = []
    ask_units = []
    for o in book:
        (bid_units if o.side == "Bid" else ask_units).extend([o.price] * o.quantity)
    best = 0
    for p in sorted(set(bid_units) | set(ask_units)):
        demand = sum(1 for b in bid_units if b >= p)
        supply = sum(1 for a in ask_units if a <= p)
        best = max(best, min(demand, supply))
    return best


def update_seller_ask(seller: SellerState, last: ClearingResult,
                      delta_up: float = 0.25, delta_down: float = 0.10,
                      floor_frac: float = 0.2) -> SellerState:
    """Return the seller with its ask repriced after a clearing round.

    Requires ``last`` to be the seller's own good. Only rounds where the
    seller actually offered units carry a signal; a round with nothing on the
    shelf leaves the ask unchanged.
    """
    if last.good_id and last.good_id != seller.good_id:
        raise ContractViolation(
            f"clearing result for {last.good_id} applied to seller of {seller.good_id}"
        )
    if seller.fixed_price_mode:
        return seller
    offered = seller.offered_this_round
    if offered <= 0:
        return seller
    sold = min(last.executed_volume, offered)
    if sold >= offered:
        seller.current_ask = seller.current_ask * (1 + delta_up)
    elif sold == 0:
        floor = floor_frac * seller.base_price
        seller.current_ask = max(seller.current_ask * (1 - delta_down), floor)
    return seller


def settle(agents_by_id: dict, sellers_by_id: dict[str, SellerState],
           result: ClearingResult, emit=None) -> list[Trade]:
    """Apply a clearing result: move cash and items, decrement seller stock.

    Bids are pre-screened against cash at submission, so a buyer coming up
    short here signals a logic bug: the trade is cancelled and logged, never
    silently absorbed. Returns the trades that actually settled.
    """
    settled = []
    for trade in result.trades:
        buyer = agents_by_id[trade.buyer_id]
        seller = sellers_by_id[trade.seller_id]
        cost = trade.quantity * trade.price
        if buyer.cash + 1e-9 < cost:
            if emit is not None:
                emit("trade_cancelled", {
                    "good_id": result.good_id, "buyer": trade.buyer_id,
                    "seller": trade.seller_id, "quantity": trade.quantity,
                    "price": trade.price, "reason": "insufficient cash at settlement",
                })
            continue
        if seller.inventory < trade.quantity:
            if emit is not None:
                emit("trade_cancelled", {
                    "good_id": result.good_id, "buyer": trade.buyer_id,
                    "seller": trade.seller_id, "quantity": trade.quantity,
                    "price": trade.price, "reason": "insufficient seller inventory",
                })
            continue
        buyer.cash -= cost
        seller.revenue += cost
        seller.inventory -= trade.quantity
        buyer.add_item(result.good_id, trade.quantity)
        settled.append(trade)
        if emit is not None:
            emit("trade", {
                "good_id": result.good_id, "buyer": trade.buyer_id,
                "seller": trade.seller_id, "quantity": trade.quantity,
                "price": trade.price,
            })
    return settled
