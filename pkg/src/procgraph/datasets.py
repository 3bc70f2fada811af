"""Small deterministic graphs from the loan-processing scenario, plus generators for larger synthetic data."""

from __future__ import annotations

import random

from .graph import ErGraph, Triple, build_graph, triple

BANKING_EDGES = [
    ("Adam", "submitted", "document"),
    ("document", "part-of", "work-item"),
    ("work-item", "assigned-to", "Staff"),
    ("Staff", "created", "report"),
    ("report", "approved-by", "Manager"),
    ("Adam", "submitted", "Home-Loan-Document"),
]

BANKING_ATTRIBUTES = [
    ("Adam", "type", "customer"),
    ("document", "type", "document"),
    ("work-item", "type", "work-item"),
    ("Staff", "type", "staff"),
    ("Manager", "type", "manager"),
    ("Home-Loan-Document", "type", "artifact"),
    ("Home-Loan-Document", "category", "home-loan"),
    ("Home-Loan-Document", "submission-branch", "Sydney"),
    ("Home-Loan-Document", "submission-date", "2017-12-05"),
    ("report", "type", "artifact"),
    ("report", "category", "home-loan"),
    ("report", "submission-branch", "Melbourne"),
    ("report", "submission-date", "2018-01-10"),
]


def banking_triples(attributes: bool = True) -> list[Triple]:
    out = [triple(s, p, o) for s, p, o in BANKING_EDGES]
    if attributes:
        out += [triple(s, "@" + a, v) for s, a, v in BANKING_ATTRIBUTES]
    return out


def banking_graph(attributes: bool = True) -> ErGraph:
    """Customer Adam's loan application: submission, work item, staff, report and approval."""
    return build_graph(banking_triples(attributes))


def evolution_triples() -> list[Triple]:
    """Two versions of Adam's loan document linked by three activity paths.

    Activities are reified nodes carrying what/how/when/who attributes; the
    first two paths consist of lifecycle/create activities only.
    """
    out = [
        triple("Adam_loan_document_v1", "next-version", "Adam_loan_document_v2"),
        triple("Adam_loan_document_v1", "@type", "version"),
        triple("Adam_loan_document_v1", "@version-of", "Adam_loan_document"),
        triple("Adam_loan_document_v1", "@created-at", "2017-12-01T09:00:00.000Z"),
        triple("Adam_loan_document_v1", "@author", "Adam"),
        triple("Adam_loan_document_v2", "@type", "version"),
        triple("Adam_loan_document_v2", "@version-of", "Adam_loan_document"),
        triple("Adam_loan_document_v2", "@created-at", "2017-12-04T16:00:00.000Z"),
        triple("Adam_loan_document_v2", "@author", "Ben"),
        triple("Adam_loan_document_v2", "@parent", "Adam_loan_document_v1"),
        triple("Adam_loan_document", "@type", "artifact"),
    ]
    activities = {
        "act1": ("lifecycle", "create", "2017-12-02T10:00:00.000Z", "Tim"),
        "act2": ("lifecycle", "create", "2017-12-02T11:00:00.000Z", "Eli"),
        "act3": ("lifecycle", "create", "2017-12-03T09:30:00.000Z", "Ben"),
        "act4": ("lifecycle", "use", "2017-12-03T12:00:00.000Z", "Eli"),
        "act5": ("archiving", "update", "2017-12-04T15:00:00.000Z", "Ben"),
    }
    for act, (what, how, when, who) in activities.items():
        out += [
            triple(act, "@type", "activity"),
            triple(act, "@what", what),
            triple(act, "@how", how),
            triple(act, "@when", when),
            triple(act, "@who", who),
            triple(act, "@where", "Sydney"),
        ]
    chains = [["act1"], ["act2", "act3"], ["act4", "act5"]]
    for chain in chains:
        hops = ["Adam_loan_document_v1", *chain, "Adam_loan_document_v2"]
        out += [triple(a, "activity", b) for a, b in zip(hops, hops[1:])]
    return out


def evolution_graph() -> ErGraph:
    return build_graph(evolution_triples())


MESSAGE_QUERY = """select ?m
where {
  ?m @type message.
  ?m @requestsize ?x.
  ?m @responsesize ?y.
  ?m @timestamp ?t.
  FILTER (?x=?y && ?t > t1 && ?t < t2). }"""

VENDOR_QUERY = """select ?vendor ?offer ?review
where {
  ?vendor @type vendor.
  ?vendor @country 'Australia'.
  ?vendor @name ?name.
  ?offer vendor ?vendor.
  ?offer @product ?product.
  ?offer @delivery-days ?days.
  ?review review-for ?offer.
  ?review @rating ?rating.
  ?review @reviewer ?reviewer.
  FILTER (?days <= 15) }"""


def message_triples(n: int, seed: int = 0, t1: str = "t1", t2: str = "t2") -> list[Triple]:
    """``n`` messages with random sizes and integer timestamps 0..99.

    With the default ``t1``/``t2`` placeholders the timestamp window is
    compared lexicographically; pass numeric bounds for a numeric window.
    """
    rng = random.Random(seed)
    out = []
    for i in range(n):
        m = f"msg{i:05d}"
        size = rng.randint(1, 4)
        out += [
            triple(m, "@type", "message" if rng.random() < 0.9 else "note"),
            triple(m, "@requestsize", str(size)),
            triple(m, "@responsesize", str(size if rng.random() < 0.5 else rng.randint(1, 4))),
            triple(m, "@timestamp", str(rng.randint(0, 99))),
        ]
        out.append(triple(f"actor{rng.randint(0, 9)}", "sent", m))
    return out


def vendor_triples(vendors: int, offers_per_vendor: int, reviews_per_offer: int, seed: int = 0) -> list[Triple]:
    """Vendor / offer / review graph shaped for three star joins linked by two chain joins."""
    rng = random.Random(seed)
    out = []
    for v in range(vendors):
        vendor = f"vendor{v:05d}"
        out += [
            triple(vendor, "@type", "vendor"),
            triple(vendor, "@country", rng.choice(["Australia", "Australia", "NZ"])),
            triple(vendor, "@name", f"Bank {v}"),
        ]
        for o in range(offers_per_vendor):
            offer = f"offer{v:05d}-{o:02d}"
            out += [
                triple(offer, "vendor", vendor),
                triple(offer, "@product", rng.choice(["home loan", "business loan", "fixed rate", "variable rate"])),
                triple(offer, "@delivery-days", str(rng.randint(1, 30))),
            ]
            for r in range(reviews_per_offer):
                review = f"review{v:05d}-{o:02d}-{r:02d}"
                out += [
                    triple(review, "review-for", offer),
                    triple(review, "@rating", str(rng.randint(1, 5))),
                    triple(review, "@reviewer", f"user{rng.randint(0, 999)}"),
                ]
    return out


def event_log_csv(events: int, keys: int, seed: int = 0, activities: str = "ABCDEF") -> str:
    """CSV event log with an ``order-id`` correlation column; activities per order follow random walks."""
    rng = random.Random(seed)
    lines = ["event_id,timestamp,actor,activity,order-id,amount"]
    for i in range(events):
        key = rng.randrange(keys)
        second = rng.randrange(0, 86400 * 30)
        stamp = f"2017-12-{1 + second // 86400:02d}T{second % 86400 // 3600:02d}:{second % 3600 // 60:02d}:{second % 60:02d}.{rng.randrange(1000):03d}Z"
        lines.append(
            f"e{i:06d},{stamp},actor{rng.randrange(20)},{rng.choice(activities)},order-{key:03d},{rng.randint(1, 500)}"
        )
    return "\n".join(lines) + "\n"
