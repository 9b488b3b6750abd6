"""The bundled apple fixture and the competency questions shipped with it.

The fixture aligns the French ``:pomme`` and German ``:apfel`` concepts to
the pivot object ``:apple``, places ``:apple`` in a small broader-than
hierarchy (``:fruit`` > ``:apple_concept`` > ``:fuji_apple``, with
``:red_thing`` also broader than ``:fuji_apple``), notarizes one
generalization event from ``:fuji_apple`` to ``:apple``, and adds one
correlation of every remaining kind around a harvest.
"""

from __future__ import annotations

from datetime import datetime, timedelta, timezone
from typing import Optional

from .access import OpClass, Permission
from .eventlog import Keyring, StepClock
from .model import CorrelationKind, Domain, EntityId
from .query import CompetencyQuestion, Expectation, Pattern, Var
from .store import Store

FIXTURE_START = datetime(2024, 1, 1, tzinfo=timezone.utc)
NOTARY = "alice"
CURATOR = "curator"
CONSENT_SUBJECT = "ds-42"
CONSENT_PURPOSE = "research"


def _e(text: str) -> EntityId:
    return EntityId.parse(text)


def build_apple_fixture(store: Optional[Store] = None) -> Store:
    """Populate (or create) a store with the apple fixture."""
    if store is None:
        store = Store(clock=StepClock(FIXTURE_START, timedelta(seconds=1)), keyring=Keyring())
    system = "system"
    store.define_role(
        system,
        "curator",
        [Permission(d, op) for d in Domain for op in (OpClass.READ, OpClass.WRITE)],
    )
    store.register_actor(system, CURATOR, ["curator"])
    store.register_actor(system, NOTARY, ["event-notary"])

    c = CURATOR
    store.create_entity(c, ":apple", Domain.OBJECT, {"en": "apple"})
    store.create_entity(c, ":orchard", Domain.OBJECT, {"en": "orchard"})
    for cid, label in [
        (":fruit", "fruit"),
        (":apple_concept", "apple"),
        (":fuji_apple", "Fuji apple"),
        (":red_thing", "red thing"),
    ]:
        store.create_entity(c, cid, Domain.CONCEPT, {"en": label}, {"lang": "en"})
    store.create_entity(c, ":pomme", Domain.CONCEPT, {"fr": "pomme"}, {"lang": "fr"})
    store.create_entity(c, ":apfel", Domain.CONCEPT, {"de": "Apfel"}, {"lang": "de"})
    store.create_entity(c, ":generalize", Domain.ACTION, {"en": "generalize"})
    store.create_entity(c, ":harvest", Domain.ACTION, {"en": "harvest"})
    store.create_entity(c, ":harvest_2023", Domain.EVENT, {"en": "2023 harvest"}, {"year": 2023})

    store.add_broader(c, ":fruit", ":apple_concept")
    store.add_broader(c, ":apple_concept", ":fuji_apple")
    store.add_broader(c, ":red_thing", ":fuji_apple")
    store.set_anchor(c, ":apple", ":apple_concept")

    store.map_concept(c, ":pomme", ":apple", "fr")
    store.map_concept(c, ":apfel", ":apple", "de")

    store.link(c, ":harvest", ":harvest_2023")     # Reason
    store.link(c, ":orchard", ":harvest")          # Cause
    store.link(c, ":fuji_apple", ":generalize")    # Method
    store.link(c, ":fruit", ":harvest_2023")       # Goal
    store.link(c, ":orchard", ":harvest_2023")     # Effect

    store.append_event(
        NOTARY,
        ":generalize",
        ":fuji_apple",
        before=store.entity_state(":fuji_apple"),
        after=store.entity_state(":apple"),
    )
    store.record_consent(
        c, CONSENT_SUBJECT, CONSENT_PURPOSE, [":apple"], FIXTURE_START + timedelta(days=1)
    )
    return store


def _v(name: str) -> Var:
    return Var(name)


def shipped_cqs() -> list[CompetencyQuestion]:
    """Competency questions for the apple fixture.

    These are our own formalizations of the kinds of question the store is
    meant to answer; each expectation holds on :func:`build_apple_fixture`.
    """
    return [
        CompetencyQuestion(
            "concepts-mapped-to-apple",
            "Which concepts are aligned with the object :apple?",
            (Pattern(_e(":apple"), CorrelationKind.SCHEME, _v("c")),),
            Expectation.exactly([{"c": ":apfel"}, {"c": ":pomme"}]),
        ),
        CompetencyQuestion(
            "translations-of-pomme-de",
            "What is the German term for :pomme?",
            (
                Pattern(_v("o"), CorrelationKind.SCHEME, _e(":pomme")),
                Pattern(_v("o"), CorrelationKind.SCHEME, _v("t"), attributes={("t", "lang"): "de"}),
            ),
            Expectation.exactly([{"t": ":apfel"}]),
            select=("t",),
        ),
        CompetencyQuestion(
            "all-objects",
            "Which objects does the store describe?",
            (Pattern(_v("x"), domains={"x": Domain.OBJECT}),),
            Expectation.exactly([{"x": ":apple"}, {"x": ":orchard"}, {"x": "rcpt:26"}]),
        ),
        CompetencyQuestion(
            "events-affecting-fuji-apple",
            "Which logged events affected :fuji_apple?",
            (
                Pattern(
                    _v("e"),
                    domains={"e": Domain.EVENT},
                    attributes={("e", "cdo.subject"): ":fuji_apple"},
                ),
            ),
            Expectation.count_of(4),
        ),
        CompetencyQuestion(
            "generalization-events",
            "Was a generalization of a concept ever recorded?",
            (
                Pattern(
                    _v("e"),
                    domains={"e": Domain.EVENT},
                    attributes={("e", "cdo.action"): ":generalize"},
                ),
            ),
            Expectation.exactly([{"e": "evt:25"}]),
        ),
        CompetencyQuestion(
            "reason-for-harvest-event",
            "Which action explains the 2023 harvest event?",
            (Pattern(_e(":harvest_2023"), CorrelationKind.REASON, _v("a")),),
            Expectation.exactly([{"a": ":harvest"}]),
        ),
        CompetencyQuestion(
            "causes-of-orchard",
            "Which actions operate on the orchard?",
            (Pattern(_e(":orchard"), CorrelationKind.CAUSE, _v("a")),),
            Expectation.exactly([{"a": ":harvest"}]),
        ),
        CompetencyQuestion(
            "methods-for-generalize",
            "Which concepts describe how :generalize is performed?",
            (Pattern(_v("c"), CorrelationKind.METHOD, _e(":generalize")),),
            Expectation.exactly([{"c": ":fuji_apple"}]),
        ),
        CompetencyQuestion(
            "goals-of-harvest",
            "Which concepts does the harvest event serve?",
            (Pattern(_e(":harvest_2023"), CorrelationKind.GOAL, _v("c")),),
            Expectation.exactly([{"c": ":fruit"}]),
        ),
        CompetencyQuestion(
            "effects-on-orchard",
            "Which events affected the orchard?",
            (Pattern(_e(":orchard"), CorrelationKind.EFFECT, _v("e")),),
            Expectation.exactly([{"e": ":harvest_2023"}]),
        ),
        CompetencyQuestion(
            "action-to-affected-object",
            "Which objects are touched by an action that explains some event?",
            (
                Pattern(_v("e"), CorrelationKind.REASON, _v("a")),
                Pattern(_v("o"), CorrelationKind.CAUSE, _v("a")),
            ),
            Expectation.exactly([{"o": ":orchard"}]),
            select=("o",),
        ),
        CompetencyQuestion(
            "consented-research-data",
            "Which consent receipts cover research use?",
            (
                Pattern(
                    _v("r"),
                    domains={"r": Domain.OBJECT},
                    attributes={("r", "cdo.consent.purpose"): CONSENT_PURPOSE},
                ),
            ),
            Expectation.non_empty(),
        ),
        CompetencyQuestion(
            "french-concepts",
            "Which concepts belong to the French vocabulary?",
            (Pattern(_v("c"), domains={"c": Domain.CONCEPT}, attributes={("c", "lang"): "fr"}),),
            Expectation.exactly([{"c": ":pomme"}]),
        ),
    ]

