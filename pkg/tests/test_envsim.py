import json

import pytest

from timely import envsim
from timely.envsim import (
    GAME_FIXTURES,
    ML_FIXTURES,
    SpecValidationError,
    end_game,
    game_max_score,
    game_score,
    game_step,
    initial_state,
    load_fixture_game,
    load_fixture_ml_task,
    load_fixture_reasoning_tasks,
    load_game_spec,
    ml_execute,
    valid_actions,
    verify_answer,
)
from timely.timecore import Duration


@pytest.fixture(scope="module")
def zork():
    return load_fixture_game("mini-zork")


@pytest.fixture(scope="module")
def detective():
    return load_fixture_game("mini-detective")


class TestLoading:
    def test_zork_fixture_scale(self, zork):
        assert zork.max_score == 350

    def test_all_game_fixtures_load(self):
        for name in GAME_FIXTURES:
            spec = load_fixture_game(name)
            assert spec.start in spec.states

    def test_dangling_target_rejected(self):
        doc = {
            "name": "bad",
            "start": "a",
            "max_score": 10,
            "states": {
                "a": {
                    "description": "",
                    "transitions": {"go": {"next": "missing", "score_delta": 10, "once": True}},
                }
            },
        }
        with pytest.raises(SpecValidationError, match="missing"):
            load_game_spec(json.dumps(doc))

    def test_empty_states_rejected(self):
        with pytest.raises(SpecValidationError, match="empty"):
            load_game_spec(json.dumps({"name": "x", "start": "a", "max_score": 1, "states": {}}))

    def test_unreachable_max_score_rejected(self):
        doc = {
            "name": "short",
            "start": "a",
            "max_score": 100,
            "states": {
                "a": {
                    "description": "",
                    "transitions": {"go": {"next": "a", "score_delta": 10, "once": True}},
                }
            },
        }
        with pytest.raises(SpecValidationError, match="unreachable"):
            load_game_spec(json.dumps(doc))

    def test_malformed_json_names_location(self):
        with pytest.raises(SpecValidationError, match="line"):
            load_game_spec(b"{not json")


class TestGameStep:
    def test_mailbox_message(self, zork):
        state = initial_state(zork)
        _, result = game_step(zork, state, "open mailbox")
        assert result.text == "Opening the small mailbox reveals a leaflet"
        assert result.score_delta == 0

    def test_detective_ten_points(self, detective):
        state = initial_state(detective)
        new_state, result = game_step(detective, state, "read paper")
        assert result.score_delta == 10
        assert new_state.score == 10
        assert result.text == "Your score has just gone up by ten points."

    def test_unmatched_action_is_noop(self, zork):
        state = initial_state(zork)
        new_state, result = game_step(zork, state, "xyzzy")
        assert result.score_delta == 0
        assert new_state.current == state.current
        assert new_state.steps_taken == 1

    def test_action_matching_is_normalized(self, zork):
        state = initial_state(zork)
        _, result = game_step(zork, state, "  OPEN   Mailbox ")
        assert result.text == "Opening the small mailbox reveals a leaflet"

    def test_once_deltas_fire_once(self, detective):
        state = initial_state(detective)
        state, _ = game_step(detective, state, "read paper")
        # loop back is impossible in the corridor, so craft a revisit
        doc = {
            "name": "loop",
            "start": "a",
            "max_score": 10,
            "states": {
                "a": {
                    "description": "",
                    "transitions": {
                        "grab": {"next": "b", "score_delta": 10, "once": True},
                    },
                },
                "b": {
                    "description": "",
                    "transitions": {"back": {"next": "a", "score_delta": 0}},
                },
            },
        }
        spec = load_game_spec(json.dumps(doc))
        s = initial_state(spec)
        s, r1 = game_step(spec, s, "grab")
        s, _ = game_step(spec, s, "back")
        s, r2 = game_step(spec, s, "grab")
        assert r1.score_delta == 10 and r2.score_delta == 0
        assert s.score == 10

    def test_stepping_ended_game_fails(self, zork):
        state = end_game(initial_state(zork))
        with pytest.raises(envsim.GameOverError):
            game_step(zork, state, "north")

    def test_replay_determinism(self, detective):
        def play():
            s = initial_state(detective)
            out = []
            for action in ["read paper", "look", "north", "wait"]:
                s, r = game_step(detective, s, action)
                out.append((s.current, s.score, r.text))
            return out

        assert play() == play()

    def test_score_stays_in_bounds(self, detective):
        s = initial_state(detective)
        actions = ["read paper"] + [
            detective.states[sid].best_action for sid in detective.states if sid != "the_end"
        ]
        for a in actions:
            if s.ended:
                break
            s, _ = game_step(detective, s, a or "wait")
            assert 0 <= s.score <= detective.max_score


class TestQueriesAndEnd:
    def test_zork_start_actions(self, zork):
        assert valid_actions(zork, initial_state(zork)) == [
            "open mailbox",
            "north",
            "south",
            "west",
        ]

    def test_terminal_state_has_no_actions(self, detective):
        from dataclasses import replace

        state = replace(initial_state(detective), current="the_end")
        assert valid_actions(detective, state) == []

    def test_scores(self, zork, detective):
        assert game_score(initial_state(zork)) == 0
        assert game_max_score(zork) == 350
        state, _ = game_step(detective, initial_state(detective), "read paper")
        assert game_score(state) == 10

    def test_end_game_idempotent(self, zork):
        state = initial_state(zork)
        ended = end_game(state)
        assert ended.ended
        assert end_game(ended) == ended

    def test_end_preserves_score(self, detective):
        state, _ = game_step(detective, initial_state(detective), "read paper")
        assert end_game(state).score == 10

    def test_valid_actions_reflect_post_transition_state(self, zork):
        state, _ = game_step(zork, initial_state(zork), "open mailbox")
        assert "take leaflet" in valid_actions(zork, state)


class TestVerifyAnswer:
    def make_task(self, truth):
        return envsim.ReasoningTask(
            id="t", prompt="p", ground_truth=truth, baseline_x=Duration(1)
        )

    def test_boxed_extraction(self):
        assert verify_answer(self.make_task("5"), "\\boxed{5}")

    def test_whitespace_normalization(self):
        assert verify_answer(self.make_task("5"), " 5 ")

    def test_wrong_answer(self):
        assert not verify_answer(self.make_task("5"), "6")

    def test_reflexive_on_bundled_tasks(self):
        for task in load_fixture_reasoning_tasks():
            assert verify_answer(task, task.ground_truth)

    def test_unparseable_is_false(self):
        assert not verify_answer(self.make_task("5"), "")


@pytest.fixture(scope="module")
def leaf():
    return load_fixture_ml_task("leaf_classification")


class TestMlExecute:

    def test_known_approach(self, leaf):
        result = ml_execute(leaf, "#approach: random_forest\nrest of code")
        assert result.accuracy == 0.9394
        assert result.tool_latency == Duration(5_220_000)
        assert result.text == "Submission file created successfully!"

    def test_unknown_approach_is_error_branch(self, leaf):
        result = ml_execute(leaf, "#approach: nonexistent")
        assert result.accuracy is None
        assert "failed" in result.text.lower()

    def test_no_directive_is_error_branch(self, leaf):
        result = ml_execute(leaf, "print('hello')")
        assert result.accuracy is None

    def test_pure_lookup(self, leaf):
        results = {
            (ml_execute(leaf, "#approach: random_forest").accuracy,)
            for _ in range(1000)
        }
        assert len(results) == 1

    def test_all_ml_fixtures_load(self):
        for name in ML_FIXTURES:
            task = load_fixture_ml_task(name)
            assert 3 <= len(task.approaches) <= 5
