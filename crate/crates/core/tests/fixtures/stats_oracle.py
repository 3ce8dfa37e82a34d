"""Writes stats_fixture.jsonl and prints its corpus statistics computed
independently of the Rust code."""
import json
import random
import sys
from fractions import Fraction

WORDS = ["the", "point", "is", "not", "that", "simple", "agree", "source", "no", "yes"]


def make_threads(rng):
    threads = []
    for t in range(20):
        post_id = f"p{t}"
        base = 1_400_000_000 + t * 10_000
        pool = [f"user{k}" for k in range(rng.randint(3, 9))]
        author = "[deleted]" if t % 7 == 3 else rng.choice(pool)
        comments = []
        for k in range(rng.randint(1, 12)):
            parent = post_id if not comments or rng.random() < 0.35 else rng.choice(comments)["comment_id"]
            who = rng.choice(pool)
            if rng.random() < 0.08:
                who = "[deleted]"
            n_words = rng.choice([0, 1, 5, 17, 40, 255, 256, 300]) if k % 4 == 0 else rng.randint(1, 30)
            body = " ".join(rng.choice(WORDS) for _ in range(n_words))
            if rng.random() < 0.05:
                body = "[deleted]"
            comments.append({
                "comment_id": f"{post_id}_{k}",
                "parent_id": parent,
                "author": who,
                "created_utc": base + 60 * (k + 1),
                "body": body,
            })
        threads.append({
            "post_id": post_id,
            "subreddit": "fixture",
            "author": author,
            "created_utc": base,
            "title": f"title {t}",
            "selftext": "",
            "label": t % 2,
            "comments": comments,
        })
    return threads


def stats(threads):
    users = comments = words = long = 0
    for t in threads:
        keys = {"deleted#post" if t["author"] == "[deleted]" else t["author"]}
        for k, c in enumerate(t["comments"]):
            deleted = c["author"] == "[deleted]" or c["body"] == "[deleted]"
            keys.add(f"deleted#{k}" if deleted else c["author"])
            n = len(c["body"].split())
            words += n
            long += n >= 256
        users += len(keys)
        comments += len(t["comments"])
    posts = len(threads)
    return {
        "post_count": posts,
        "users": users,
        "comments": comments,
        "words": words,
        "long": long,
        "avg_users_per_post": users / posts,
        "avg_comments_per_post": comments / posts,
        "avg_words_per_comment": words / comments,
        "pct_comments_tokens_ge_256": 100.0 * (long / comments),
        "exact": [str(Fraction(users, posts)), str(Fraction(comments, posts)),
                  str(Fraction(words, comments)), str(Fraction(100 * long, comments))],
    }


if __name__ == "__main__":
    threads = make_threads(random.Random(20200))
    with open(sys.argv[1], "w") as f:
        for t in threads:
            f.write(json.dumps(t) + "\n")
    print(json.dumps(stats(threads), indent=1))
