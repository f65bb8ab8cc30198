#!/usr/bin/env python3
"""Regenerates the bundled fixtures under fixtures/.

Deterministic: the same script always writes the same bytes.
"""

import json
import math
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "fixtures"
N = 100

SENTIMENT = {
    "Negative": ["hate", "boring", "awful", "terrible", "dislike", "disappointing"],
    "Positive": ["love", "great", "enjoy", "wonderful", "fantastic", "awesome"],
}

TOPICS = {
    "Automobiles": ["car", "engine", "vehicle", "racing"],
    "Cooking": ["recipe", "cooking", "kitchen", "chef"],
    "Travel": ["travel", "journey", "flight", "trip"],
    "Technology": ["robot", "computer", "hacker", "gadget"],
    "Fashion": ["fashion", "dress", "designer", "runway"],
    "History": ["history", "empire", "ancient", "war"],
}

# Target per-dimension entropies for versions A, B and C.
TARGETS = {"A": (0.76, 0.58), "B": (0.82, 0.67), "C": (0.66, 0.93)}

FILLER_USER = [
    "can you suggest something for tonight",
    "i want a film to watch this weekend",
    "what should i watch next",
    "any recommendation for a movie night",
]
FILLER_SYSTEM = [
    "how about this one",
    "you might like these",
    "here are a few options",
    "this could be a good match",
]


def h(counts, base):
    total = sum(counts)
    return sum((c / total) * math.log(total / c, base) for c in counts if c)


def closest_binary(target):
    return min(range(1, N), key=lambda k: abs(h([k, N - k], 2) - target))


def partitions(total, parts, cap):
    """Non-increasing sequences of `parts` non-negative ints summing to `total`."""
    if parts == 1:
        if total <= cap:
            yield [total]
        return
    for first in range(min(total, cap), -1, -1):
        if first * parts < total:
            break
        for rest in partitions(total - first, parts - 1, first):
            yield [first] + rest


def topic_counts(target):
    return min(partitions(N, 6, N), key=lambda c: (abs(h(c, 6) - target), c))


def conversation(rng, cid, version, sentiment, topic):
    sent_word = rng.choice(SENTIMENT[sentiment])
    topic_word = rng.choice(TOPICS[topic])
    other_topic = rng.choice(TOPICS[topic])
    turns = [
        {"speaker": "user", "text": f"{rng.choice(FILLER_USER)}, something about {topic_word}"},
        {"speaker": "system", "text": f"{rng.choice(FILLER_SYSTEM)}: a {other_topic} story",
         "recommendations": [f"m{rng.randrange(1000):03d}"]},
        {"speaker": "user", "text": f"i {sent_word} that kind of film"},
        {"speaker": "system", "text": rng.choice(FILLER_SYSTEM),
         "recommendations": [f"m{rng.randrange(1000):03d}", f"m{rng.randrange(1000):03d}"]},
    ]
    return {"id": cid, "source": "simulated", "generator_version": version, "turns": turns}


def version_dataset(version):
    rng = random.Random(f"version-{version}")
    sent_target, topic_target = TARGETS[version]
    negatives = closest_binary(sent_target)
    sentiments = ["Negative"] * negatives + ["Positive"] * (N - negatives)
    counts = topic_counts(topic_target)
    order = list(TOPICS)
    rng.shuffle(order)
    topics = [t for t, c in zip(order, counts) for _ in range(c)]
    rng.shuffle(sentiments)
    rng.shuffle(topics)
    rows = [
        conversation(rng, f"{version.lower()}-{i:03d}", version, s, t)
        for i, (s, t) in enumerate(zip(sentiments, topics))
    ]
    expected = (h([negatives, N - negatives], 2), h(counts, 6))
    return rows, expected


HUMAN_OPENERS = [
    "so my partner and i have a long train ride coming up and we would love something to watch",
    "i have been in a bit of a slump lately and honestly want something that will cheer me up a lot",
    "my book club decided to switch to films this month and everyone keeps arguing about what to pick",
    "last time i watched a documentary about oceans and i keep thinking about it so maybe similar",
    "not sure what i want really, something with good dialogue and maybe a twist near the end",
]
HUMAN_FOLLOWUPS = [
    "hmm i saw that one already, it was fine but the ending dragged on for far too long",
    "that sounds interesting, is it more of a slow burn or does it get going quickly",
    "oh my sister recommended that ages ago and i completely forgot about it, thanks",
    "maybe something a little lighter, we watched a heavy drama yesterday and need a break",
]
HUMAN_SYSTEM = [
    "you could try this one",
    "a lot of people enjoyed this",
    "this has a similar mood",
    "maybe this would suit you",
]

TEMPLATE = "I am looking for a movie recommendation."
SIM_FOLLOWUPS = ["Yes please.", "Another one.", "Sounds good."]
SIM_SYSTEM = "Here are some movies you may like."


def human_conversation(rng, i):
    turns = []
    for t in range(rng.choice([3, 4])):
        user = HUMAN_OPENERS[rng.randrange(len(HUMAN_OPENERS))] if t == 0 else rng.choice(HUMAN_FOLLOWUPS)
        turns.append({"speaker": "user", "text": user})
        slate = [f"m{rng.randrange(1000):03d}" for _ in range(rng.choice([1, 2, 3]))]
        turns.append({"speaker": "system", "text": rng.choice(HUMAN_SYSTEM), "recommendations": slate})
    return {"id": f"human-{i:03d}", "source": "human", "turns": turns}


def simulated_conversation(rng, i):
    turns = [{"speaker": "user", "text": TEMPLATE}]
    turns.append({"speaker": "system", "text": SIM_SYSTEM,
                  "recommendations": [f"m{rng.randrange(1000):03d}" for _ in range(5)]})
    if rng.random() < 0.5:
        turns.append({"speaker": "user", "text": rng.choice(SIM_FOLLOWUPS)})
        turns.append({"speaker": "system", "text": SIM_SYSTEM,
                      "recommendations": [f"m{rng.randrange(1000):03d}" for _ in range(4)]})
    return {"id": f"sim-{i:03d}", "source": "simulated", "generator_version": "S1", "turns": turns}


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, separators=(",", ":")) + "\n")


EVAL_TOML = """\
[versions]
A = "version_a.jsonl"
B = "version_b.jsonl"
C = "version_c.jsonl"

[[dimensions]]
name = "Sentiment"
vocabulary = ["Negative", "Positive"]
classifier = { lexicon = "lexicons/sentiment.json" }

[[dimensions]]
name = "Topic"
vocabulary = ["Automobiles", "Cooking", "Travel", "Technology", "Fashion", "History"]
classifier = { lexicon = "lexicons/topic.json" }

[realism]
human_pool = "human_pool.jsonl"
simulated_pool = "simulated_pool.jsonl"
n = 50
human_fraction = 0.5
seed = 7
"""


def main():
    (ROOT / "lexicons").mkdir(parents=True, exist_ok=True)
    for name, lex in [("sentiment", SENTIMENT), ("topic", TOPICS)]:
        (ROOT / "lexicons" / f"{name}.json").write_text(json.dumps(lex, indent=2) + "\n")

    expected = {}
    for version in TARGETS:
        rows, ent = version_dataset(version)
        write_jsonl(ROOT / f"version_{version.lower()}.jsonl", rows)
        expected[version] = {"Sentiment": ent[0], "Topic": ent[1]}
    (ROOT / "expected_entropies.json").write_text(json.dumps(expected, indent=2, sort_keys=True) + "\n")

    rng = random.Random("discriminator")
    write_jsonl(ROOT / "human_pool.jsonl", [human_conversation(rng, i) for i in range(100)])
    write_jsonl(ROOT / "simulated_pool.jsonl", [simulated_conversation(rng, i) for i in range(100)])
    (ROOT / "eval.toml").write_text(EVAL_TOML)

    for v, e in expected.items():
        print(v, {k: round(x, 4) for k, x in e.items()})


if __name__ == "__main__":
    main()
