"""Regenerate the synthetic eval fixture and its golden outputs.

The dataset, manifest, and scripted replies are authored here as data; the
golden report and curve CSVs are frozen library output. Rerun after any
deliberate change to the eval pipeline's output format and review the diff:

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from loopgate.backend import ScriptedBackend, ScriptedRule
from loopgate.evaluation import (
    load_dataset,
    run_offline_eval,
    serialize_report,
    write_curves_csv,
)
from loopgate.prompting import StrategyKind
from loopgate.uncertainty import Method

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
GOLDEN = FIXTURES / "golden"

TASKS = {
    "open_drawer": {
        "instruction": "Open the drawer",
        "plan": ["open the drawer"],
        "expected": ["drawer opened"],
    },
    "sponge_in_drawer": {
        "instruction": "Put the sponge into the drawer",
        "plan": ["open the drawer", "pick up the sponge", "put the sponge into the drawer"],
        "expected": ["drawer opened", "sponge picked up", "sponge in the drawer"],
    },
    "pick_place_mouse": {
        "instruction": "Put the mouse on the notebook",
        "plan": ["pick up the mouse", "put the mouse on the notebook"],
        "expected": ["mouse picked up", "mouse on the notebook"],
    },
}

# Per sample: task, subtask index, true label, then the scripted behavior:
# self-stated reply for yes/no and next-step prompts, the analysis sentence,
# the plain reply + option probabilities for yes/no, and the same for
# next-step. s12 deliberately has no rules so backend errors surface as an
# excluded sample. s03's self-stated replies do not parse; s04's plain
# yes/no reply names no option.
SAMPLES = [
    {
        "id": "s01", "task": "open_drawer", "index": 0, "label": "success",
        "se_yn": "I am 95% certain that the answer is Yes.",
        "se_nap": "I am 90% certain that the answer is B.",
        "analysis": "The drawer front is pulled out with visible interior space.",
        "yn": ("Yes.", {"Yes": 0.9, "No": 0.1}),
        "nap": ("B.", {"A": 0.15, "B": 0.85}),
    },
    {
        "id": "s02", "task": "sponge_in_drawer", "index": 0, "label": "success",
        "se_yn": "I am 80% certain that the answer is Yes.",
        "se_nap": "I am 75% certain that the answer is B.",
        "analysis": "The drawer sits open; the sponge rests on the table.",
        "yn": ("Yes.", {"Yes": 0.75, "No": 0.25}),
        "nap": ("B.", {"A": 0.2, "B": 0.7, "C": 0.07, "D": 0.03}),
    },
    {
        "id": "s03", "task": "sponge_in_drawer", "index": 1, "label": "failure",
        "se_yn": "I am fairly sure it worked out.",
        "se_nap": "I think the next step is unclear.",
        "analysis": "The gripper is empty; the sponge is still on the table.",
        "yn": ("No.", {"Yes": 0.35, "No": 0.65}),
        "nap": ("A.", {"A": 0.6, "B": 0.25, "C": 0.1, "D": 0.05}),
    },
    {
        "id": "s04", "task": "sponge_in_drawer", "index": 2, "label": "success",
        "se_yn": "I am 60% certain that the answer is Yes.",
        "se_nap": "I am 65% certain that the answer is D.",
        "analysis": "The sponge lies inside the open drawer cavity.",
        "yn": ("Looks about right to me.", {"Yes": 0.7, "No": 0.3}),
        "nap": ("D.", {"A": 0.08, "B": 0.12, "C": 0.25, "D": 0.55}),
    },
    {
        "id": "s05", "task": "pick_place_mouse", "index": 0, "label": "success",
        "se_yn": "I am 75% certain that the answer is Yes.",
        "se_nap": "I am 70% certain that the answer is B.",
        "analysis": "The mouse hangs in the gripper above the desk.",
        "yn": ("Yes.", {"Yes": 0.65, "No": 0.35}),
        "nap": ("B.", {"A": 0.3, "B": 0.55, "C": 0.15}),
    },
    {
        "id": "s06", "task": "pick_place_mouse", "index": 1, "label": "failure",
        "se_yn": "I am 55% certain that the answer is No.",
        "se_nap": "I am 55% certain that the answer is C.",
        "analysis": "The mouse sits beside the notebook, not on it.",
        "yn": ("No.", {"Yes": 0.45, "No": 0.55}),
        "nap": ("C.", {"A": 0.2, "B": 0.35, "C": 0.45}),
    },
    {
        "id": "s07", "task": "open_drawer", "index": 0, "label": "failure",
        "se_yn": "I am 90% certain that the answer is Yes.",
        "se_nap": "I am 85% certain that the answer is B.",
        "analysis": "The drawer face is flush with the cabinet.",
        "yn": ("Yes.", {"Yes": 0.85, "No": 0.15}),
        "nap": ("B.", {"A": 0.2, "B": 0.8}),
    },
    {
        "id": "s08", "task": "sponge_in_drawer", "index": 0, "label": "failure",
        "se_yn": "I am 65% certain that the answer is No.",
        "se_nap": "I am 60% certain that the answer is A.",
        "analysis": "The drawer remains closed; its handle is untouched.",
        "yn": ("No.", {"Yes": 0.4, "No": 0.6}),
        "nap": ("A.", {"A": 0.5, "B": 0.3, "C": 0.15, "D": 0.05}),
    },
    {
        "id": "s09", "task": "sponge_in_drawer", "index": 1, "label": "success",
        "se_yn": "I am 85% certain that the answer is Yes.",
        "se_nap": "I am 80% certain that the answer is C.",
        "analysis": "The sponge is clamped in the gripper above the counter.",
        "yn": ("Yes.", {"Yes": 0.78, "No": 0.22}),
        "nap": ("C.", {"A": 0.1, "B": 0.2, "C": 0.6, "D": 0.1}),
    },
    {
        "id": "s10", "task": "pick_place_mouse", "index": 0, "label": "failure",
        "se_yn": "I am 50% certain that the answer is No.",
        "se_nap": "I am 50% certain that the answer is B.",
        "analysis": "The mouse is still on the desk near the keyboard.",
        "yn": ("No.", {"Yes": 0.48, "No": 0.52}),
        "nap": ("B.", {"A": 0.35, "B": 0.5, "C": 0.15}),
    },
    {
        "id": "s11", "task": "pick_place_mouse", "index": 1, "label": "success",
        "se_yn": "I am 70% certain that the answer is Yes.",
        "se_nap": "I am 70% certain that the answer is C.",
        "analysis": "The mouse rests centered on the notebook cover.",
        "yn": ("Yes.", {"Yes": 0.6, "No": 0.4}),
        "nap": ("C.", {"A": 0.2, "B": 0.1, "C": 0.7}),
    },
    {
        "id": "s12", "task": "sponge_in_drawer", "index": 2, "label": "failure",
    },
]

SE_YN_MARK = 'satisfied?\nA: Yes / No.\nAnswer in the exact format'
SE_NAP_MARK = '(One of the subtasks in the list).\nAnswer in the exact format'
ANALYSIS_MARK = "analyze the spatial relationship"
YN_MARK = "A: Yes / No."
NAP_MARK = "which subtask should be the next step"


def build_dataset() -> list[dict]:
    rows = []
    for s in SAMPLES:
        task = TASKS[s["task"]]
        rows.append(
            {
                "id": s["id"],
                "task_id": s["task"],
                "instruction": task["instruction"],
                "description": task["plan"][s["index"]],
                "expected_state": task["expected"][s["index"]],
                "observation": {"kind": "image", "captured_at": 0,
                                "image_ref": f"img://{s['id']}"},
                "label": s["label"],
                "plan": task["plan"],
                "subtask_index": s["index"],
            }
        )
    return rows


def build_rules() -> list[dict]:
    rules = []
    for s in SAMPLES:
        if "yn" not in s:
            continue
        obs = f"img://{s['id']}"
        yn_reply, yn_probs = s["yn"]
        nap_reply, nap_probs = s["nap"]
        rules.extend(
            [
                ScriptedRule(reply=s["se_yn"], match_text=SE_YN_MARK,
                             match_observation=obs),
                ScriptedRule(reply=s["se_nap"], match_text=SE_NAP_MARK,
                             match_observation=obs),
                ScriptedRule(reply=s["analysis"], match_text=ANALYSIS_MARK,
                             match_observation=obs),
                ScriptedRule(reply=yn_reply, match_text=YN_MARK,
                             match_observation=obs, option_probs=yn_probs),
                ScriptedRule(reply=nap_reply, match_text=NAP_MARK,
                             match_observation=obs, option_probs=nap_probs),
            ]
        )
    return [r.to_dict() for r in rules]


def build_manifest(rows: list[dict]) -> dict:
    tasks: dict[str, dict] = {}
    for row in rows:
        entry = tasks.setdefault(row["task_id"], {"total": 0, "success": 0, "failure": 0})
        entry["total"] += 1
        entry[row["label"]] += 1
    return {
        "tasks": tasks,
        "total": len(rows),
        "success": sum(1 for r in rows if r["label"] == "success"),
        "failure": sum(1 for r in rows if r["label"] == "failure"),
    }


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    GOLDEN.mkdir(parents=True, exist_ok=True)

    rows = build_dataset()
    (FIXTURES / "synthetic.jsonl").write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), encoding="utf-8"
    )
    (FIXTURES / "synthetic_manifest.json").write_text(
        json.dumps(build_manifest(rows), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    (FIXTURES / "synthetic_rules.json").write_text(
        json.dumps({"rules": build_rules()}, indent=2) + "\n", encoding="utf-8"
    )

    samples = load_dataset(FIXTURES / "synthetic.jsonl", FIXTURES / "synthetic_manifest.json")
    backend = ScriptedBackend.from_file(FIXTURES / "synthetic_rules.json")
    report = run_offline_eval(
        samples,
        [StrategyKind.SSC, StrategyKind.SRA, StrategyKind.NAP],
        [Method.TOKEN_PROBABILITY, Method.ENTROPY, Method.SELF_EXPLAINED],
        backend,
    )
    (GOLDEN / "offline_report.json").write_text(serialize_report(report), encoding="utf-8")
    written = write_curves_csv(report, GOLDEN / "curves")
    print(f"wrote {len(rows)} samples, report, and {len(written)} curve files")
    for cell in report.cells:
        print(
            f"  {cell.key}: n={cell.samples} gen={cell.generated} "
            f"acc={cell.detection_accuracy} cal={cell.calibration_auc} "
            f"sel={cell.selective_auc} genrate={cell.generation_rate}"
        )


if __name__ == "__main__":
    main()
