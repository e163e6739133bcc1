"""Receptive controller synthesis for safety in timed automaton games.

Pipeline: parse a two-player timed game (.tg), build the region-based
finite concurrent game with observation predicates, restrict it to the
safety fixpoint, solve the receptiveness objective as a Muller game via its
Zielonka tree, and extract a finite-memory region controller that can be
serialized, replayed, and stress-tested against adversarial (including
zeno-attacking) environments in exact rational arithmetic.
"""

__version__ = "0.1.0"

from .controller import Controller, Prescription, observation_key
from .enlarged import (EnlargedRegion, PredicateState, TickRegion,
                       initial_predicates, update_predicates)
from .errors import (AbstractionError, CapacityError, GameSpecError,
                     ModelError, NotAStateError, RuleViolation, TagsynthError)
from .finite_game import (FiniteConcurrentGame, TurnArena, build_finite_game,
                          cpre1, safe_restricted_arena, safety_fixpoint,
                          to_turn_arena)
from .gamespec import (parse_controller, parse_gamespec, serialize_controller,
                       serialize_gamespec)
from .model import (BOT1, BOT2, Edge, Move, Stutter, TimedGameModel,
                    holds_throughout, validate_model)
from .muller import (Strategy, check_strategy_universal, reachable_lassos,
                     solve_muller, solve_muller_both, strategy_product)
from .objectives import (MullerCondition, build_phi_dagger, build_phi_star,
                         build_tick_objective, eval_lasso, formula_to_muller)
from .regions import (Region, chain, delay_intervals, enumerate_regions,
                      interval_point, pretty, region_of, sample,
                      time_successor)
from .simulator import (ScriptedAdversary, Verdict, ZenoAttacker,
                        initial_play, make_adversary, random_adversary, run,
                        step, validate_move)
from .synthesis import (WinningCertificate, check_controller_universal,
                        concretize, controller_from_policy, cross_validate,
                        enumerate_memoryless_region_strategies,
                        no_memoryless_region_winner, sure_safe, synthesize)
from .zielonka import ZielonkaTree, build_zielonka


def corpus_names():
    """Names of the bundled example games, sorted."""
    from importlib import resources
    folder = resources.files(__name__) / "corpus"
    return sorted(p.name[:-3] for p in folder.iterdir()
                  if p.name.endswith(".tg"))


def corpus_text(name: str) -> str:
    from importlib import resources
    if not name.endswith(".tg"):
        name += ".tg"
    return (resources.files(__name__) / "corpus" / name).read_text("utf-8")


def load_corpus(name: str):
    """Parse a bundled example game: (model, safe location set)."""
    return parse_gamespec(corpus_text(name))
