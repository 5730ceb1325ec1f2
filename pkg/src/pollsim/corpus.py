"""Voter-pool construction from raw post-level records.

Four cleaning stages, applied in order: user aggregation, language
filtering, post filtering (keep prolific users, sample a fixed history),
and user cleaning (drop spam-like accounts via pairwise word-overlap of a
small post sample).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from .jsonl import dumps_canonical, read_jsonl
from .rng import derive_seed, make_rng

RAW_FIELDS = ("user_id", "user_at_name", "tweet_id", "tweet_content", "pub_time", "lang")

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)


class PipelineError(RuntimeError):
    """Pipeline abort, tagged with the stage that failed."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def parse_time(value: object) -> datetime:
    """Parse a post timestamp (ISO 8601 string or epoch seconds) to UTC."""
    if isinstance(value, datetime):
        dt = value
    elif isinstance(value, (int, float)) and not isinstance(value, bool):
        dt = datetime.fromtimestamp(float(value), tz=timezone.utc)
    elif isinstance(value, str):
        text = value.strip().replace("Z", "+00:00")
        dt = datetime.fromisoformat(text)
    else:
        raise ValueError(f"unparseable pub_time: {value!r}")
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc).replace(microsecond=0)


def format_time(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass
class RawPost:
    user_id: str
    user_at_name: str
    tweet_id: str
    tweet_content: str
    pub_time: datetime
    lang: str | None = None

    @classmethod
    def from_dict(cls, row: dict) -> "RawPost":
        for name in ("user_id", "tweet_id", "tweet_content", "pub_time"):
            if name not in row or row[name] is None:
                raise ValueError(f"missing field {name}")
        content = str(row["tweet_content"])
        if not content.strip():
            raise ValueError("empty tweet_content")
        lang = row.get("lang")
        return cls(
            user_id=str(row["user_id"]),
            user_at_name=str(row.get("user_at_name", "")),
            tweet_id=str(row["tweet_id"]),
            tweet_content=content,
            pub_time=parse_time(row["pub_time"]),
            lang=str(lang) if lang is not None else None,
        )


@dataclass
class Post:
    tweet_id: str
    text: str
    pub_time: datetime
    lang: str | None = None

    def word_count(self) -> int:
        return len(self.text.split())

    def to_dict(self) -> dict:
        return {"tweet_id": self.tweet_id, "text": self.text, "pub_time": format_time(self.pub_time)}


@dataclass
class UserRecord:
    user_id: str
    handle: str
    posts: list[Post]
    repeatability_score: float | None = None
    tags: dict[str, str | None] | None = None

    @property
    def post_count(self) -> int:
        return len(self.posts)

    @property
    def avg_words(self) -> float:
        if not self.posts:
            return 0.0
        return sum(p.word_count() for p in self.posts) / len(self.posts)

    def sort_posts(self) -> None:
        self.posts.sort(key=lambda p: (p.pub_time, p.tweet_id))

    def to_dict(self) -> dict:
        row = {
            "user_id": self.user_id,
            "handle": self.handle,
            "posts": [p.to_dict() for p in self.posts],
            "post_count": self.post_count,
            "avg_words": round(self.avg_words, 6),
        }
        if self.repeatability_score is not None:
            row["repeatability_score"] = round(self.repeatability_score, 9)
        if self.tags is not None:
            row["tags"] = self.tags
        return row

    @classmethod
    def from_dict(cls, row: dict) -> "UserRecord":
        posts = [
            Post(tweet_id=p["tweet_id"], text=p["text"], pub_time=parse_time(p["pub_time"]))
            for p in row["posts"]
        ]
        return cls(
            user_id=row["user_id"],
            handle=row.get("handle", ""),
            posts=posts,
            repeatability_score=row.get("repeatability_score"),
            tags=row.get("tags"),
        )


def _histogram(values: Iterable[float], edges: list[float]) -> dict[str, int]:
    """Counts per half-open bin [edges[i], edges[i+1]); last bin is open-ended."""
    counts = {f"[{edges[i]:g},{edges[i + 1]:g})": 0 for i in range(len(edges) - 1)}
    counts[f"[{edges[-1]:g},inf)"] = 0
    keys = list(counts)
    for v in values:
        idx = len(edges) - 1
        for i in range(len(edges) - 1):
            if edges[i] <= v < edges[i + 1]:
                idx = i
                break
        counts[keys[idx]] += 1
    return counts


@dataclass
class CleaningReport:
    """Stage counts and summary histograms for one pipeline run."""

    input_posts: int = 0
    malformed_posts: int = 0
    duplicate_posts: int = 0
    input_users: int = 0
    users_after_language: int = 0
    posts_after_language: int = 0
    users_after_post_filter: int = 0
    posts_after_post_filter: int = 0
    users_after_cleaning: int = 0
    posts_after_cleaning: int = 0
    short_history_users: int = 0
    posts_per_user_hist: dict[str, int] = field(default_factory=dict)
    words_per_post_hist: dict[str, int] = field(default_factory=dict)
    overlap_score_hist: dict[str, int] = field(default_factory=dict)

    def user_counts(self) -> list[int]:
        return [
            self.input_users,
            self.users_after_language,
            self.users_after_post_filter,
            self.users_after_cleaning,
        ]

    def validate(self) -> None:
        counts = self.user_counts()
        if any(a < b for a, b in zip(counts, counts[1:])):
            raise ValueError(f"stage user counts increased: {counts}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def render(self) -> str:
        lines = [
            "voter-pool cleaning report",
            "==========================",
            "",
            f"input posts          : {self.input_posts}",
            f"  malformed (skipped): {self.malformed_posts}",
            f"  duplicate ids      : {self.duplicate_posts}",
            f"input users          : {self.input_users}",
            f"after language filter: {self.users_after_language} users / {self.posts_after_language} posts",
            f"after post filter    : {self.users_after_post_filter} users / {self.posts_after_post_filter} posts",
            f"after user cleaning  : {self.users_after_cleaning} users / {self.posts_after_cleaning} posts",
            f"short-history users (overlap score defaulted to 0): {self.short_history_users}",
            "",
        ]
        for title, hist in (
            ("posts per user", self.posts_per_user_hist),
            ("words per post", self.words_per_post_hist),
            ("overlap scores", self.overlap_score_hist),
        ):
            lines.append(f"{title}:")
            if not hist:
                lines.append("  (empty)")
            for bin_label, count in hist.items():
                lines.append(f"  {bin_label:<14} {count}")
            lines.append("")
        return "\n".join(lines)


def aggregate_users(
    posts: Iterable[RawPost | dict], report: CleaningReport | None = None
) -> list[UserRecord]:
    """Group a (possibly unordered) post stream into per-user records.

    Duplicate tweet_ids are dropped (first occurrence wins); malformed rows
    are skipped and counted, never fatal. Output is sorted by user_id and
    each user's posts ascend by pub_time.
    """
    report = report if report is not None else CleaningReport()
    users: dict[str, UserRecord] = {}
    seen: set[str] = set()
    for row in posts:
        report.input_posts += 1
        if isinstance(row, RawPost):
            raw = row
        else:
            try:
                raw = RawPost.from_dict(row)
            except (ValueError, TypeError, KeyError):
                report.malformed_posts += 1
                continue
        if raw.tweet_id in seen:
            report.duplicate_posts += 1
            continue
        seen.add(raw.tweet_id)
        rec = users.get(raw.user_id)
        if rec is None:
            rec = UserRecord(user_id=raw.user_id, handle=raw.user_at_name, posts=[])
            users[raw.user_id] = rec
        rec.posts.append(
            Post(tweet_id=raw.tweet_id, text=raw.tweet_content, pub_time=raw.pub_time, lang=raw.lang)
        )
    out = [users[uid] for uid in sorted(users)]
    for rec in out:
        rec.sort_posts()
    report.input_users = len(out)
    report.posts_per_user_hist = _histogram(
        [u.post_count for u in out], [0, 1, 10, 30, 31, 100, 1000]
    )
    report.words_per_post_hist = _histogram(
        [p.word_count() for u in out for p in u.posts], [0, 5, 10, 20, 40, 80]
    )
    return out


def filter_language(
    users: Iterable[UserRecord],
    keep_lang: str = "en",
    detector: Callable[[str], str] | None = None,
    report: CleaningReport | None = None,
) -> list[UserRecord]:
    """Keep only posts in `keep_lang`; drop users left with no posts.

    A post's own lang field wins; otherwise `detector` assigns one. Missing
    or failing detection defaults to "und", which never matches.
    """
    kept: list[UserRecord] = []
    n_posts = 0
    for user in users:
        posts = []
        for post in user.posts:
            lang = post.lang
            if lang is None:
                if detector is None:
                    lang = "und"
                else:
                    try:
                        lang = detector(post.text)
                    except Exception:
                        lang = "und"
            if lang == keep_lang:
                posts.append(post)
        if posts:
            user.posts = posts
            kept.append(user)
            n_posts += len(posts)
    if report is not None:
        report.users_after_language = len(kept)
        report.posts_after_language = n_posts
    return kept


def filter_by_post_count(
    users: Iterable[UserRecord],
    min_posts: int = 30,
    sample_size: int = 30,
    seed: int = 0,
    report: CleaningReport | None = None,
) -> list[UserRecord]:
    """Keep users with strictly more than `min_posts` posts and reduce each
    to a uniform without-replacement sample of `sample_size`, time-sorted.

    Sampling is seeded per user from (seed, user_id), so the result is
    independent of input order.
    """
    if not (min_posts >= sample_size >= 1):
        raise ValueError(f"need min_posts >= sample_size >= 1, got {min_posts}, {sample_size}")
    kept: list[UserRecord] = []
    n_posts = 0
    for user in users:
        if user.post_count <= min_posts:
            continue
        rng = make_rng(seed, "post-sample", user.user_id)
        user.posts = rng.sample(user.posts, sample_size)
        user.sort_posts()
        kept.append(user)
        n_posts += user.post_count
    if report is not None:
        report.users_after_post_filter = len(kept)
        report.posts_after_post_filter = n_posts
    return kept


def tokenize(text: str) -> set[str]:
    """Unique lowercase words; splits on runs of non-alphanumerics."""
    return set(_WORD_RE.findall(text.lower()))


def jaccard(a: str, b: str) -> float:
    """Word-set Jaccard similarity. Both-empty counts as identical (1.0)."""
    set_a, set_b = tokenize(a), tokenize(b)
    if not set_a and not set_b:
        return 1.0
    union = set_a | set_b
    if not union:
        return 1.0
    return len(set_a & set_b) / len(union)


def repeatability_score(
    user: UserRecord,
    n_sample: int = 5,
    seed: int = 0,
    report: CleaningReport | None = None,
) -> float:
    """Mean pairwise similarity of an n_sample post sample.

    Sums similarity over all ordered pairs i != j and divides by n_sample**2,
    so the maximum attainable score is (n**2 - n) / n**2 (0.8 for n=5).
    Users with fewer than n_sample posts score 0.0 and are flagged.
    """
    if user.post_count < n_sample:
        if report is not None:
            report.short_history_users += 1
        return 0.0
    rng = make_rng(seed, "repeat-sample", user.user_id)
    sample = rng.sample(user.posts, n_sample)
    total = 0.0
    for i in range(n_sample):
        for j in range(i + 1, n_sample):
            total += 2.0 * jaccard(sample[i].text, sample[j].text)
    return total / (n_sample * n_sample)


def clean_users(
    users: Iterable[UserRecord],
    threshold: float = 0.28,
    n_sample: int = 5,
    seed: int = 0,
    report: CleaningReport | None = None,
) -> list[UserRecord]:
    """Score every user's content repeatability; drop those above threshold."""
    kept: list[UserRecord] = []
    scores: list[float] = []
    n_posts = 0
    for user in users:
        score = repeatability_score(user, n_sample=n_sample, seed=seed, report=report)
        user.repeatability_score = score
        scores.append(score)
        if score > threshold:
            continue
        kept.append(user)
        n_posts += user.post_count
    if report is not None:
        report.users_after_cleaning = len(kept)
        report.posts_after_cleaning = n_posts
        report.overlap_score_hist = _histogram(scores, [0, 0.05, 0.1, 0.2, 0.28, 0.5])
    return kept


@dataclass
class PipelineConfig:
    input_path: str | Path
    output_path: str | Path
    report_path: str | Path | None = None
    keep_lang: str = "en"
    min_posts: int = 30
    sample_size: int = 30
    repeat_sample: int = 5
    jaccard_threshold: float = 0.28
    seed: int = 0
    shards: int = 1
    detector: Callable[[str], str] | None = None


def _shard_of(user_id: str, shards: int) -> int:
    return derive_seed(0, "shard", user_id) % shards


def run_pipeline(config: PipelineConfig) -> tuple[Path, CleaningReport]:
    """Run all four stages and write the pool file plus a cleaning report.

    Per-user stages run shard-by-shard (sharded on user_id); results are
    merged and re-sorted, so output bytes do not depend on shard count.
    """
    report = CleaningReport()
    try:
        rows = read_jsonl(config.input_path)
        users = aggregate_users(rows, report)
    except OSError as exc:
        raise PipelineError("aggregate", f"cannot read {config.input_path}: {exc}") from exc
    except ValueError as exc:
        raise PipelineError("aggregate", str(exc)) from exc

    shards = max(1, int(config.shards))
    survivors: list[UserRecord] = []
    overlap_hist: dict[str, int] = {}
    lang_users = lang_posts = pf_users = pf_posts = 0
    for shard in range(shards):
        group = [u for u in users if _shard_of(u.user_id, shards) == shard]
        sub = CleaningReport()
        group = filter_language(group, config.keep_lang, config.detector, sub)
        group = filter_by_post_count(
            group, config.min_posts, config.sample_size, config.seed, sub
        )
        group = clean_users(
            group, config.jaccard_threshold, config.repeat_sample, config.seed, sub
        )
        survivors.extend(group)
        lang_users += sub.users_after_language
        lang_posts += sub.posts_after_language
        pf_users += sub.users_after_post_filter
        pf_posts += sub.posts_after_post_filter
        report.short_history_users += sub.short_history_users
        for key, count in sub.overlap_score_hist.items():
            overlap_hist[key] = overlap_hist.get(key, 0) + count

    report.users_after_language = lang_users
    report.posts_after_language = lang_posts
    report.users_after_post_filter = pf_users
    report.posts_after_post_filter = pf_posts

    survivors.sort(key=lambda u: u.user_id)
    report.users_after_cleaning = len(survivors)
    report.posts_after_cleaning = sum(u.post_count for u in survivors)
    report.overlap_score_hist = dict(sorted(overlap_hist.items()))
    report.validate()

    out_path = Path(config.output_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for user in survivors:
            fh.write(dumps_canonical(user.to_dict()))
            fh.write("\n")
    if config.report_path is not None:
        Path(config.report_path).parent.mkdir(parents=True, exist_ok=True)
        Path(config.report_path).write_text(report.render(), encoding="utf-8")
    return out_path, report


def read_pool(path: str | Path) -> list[UserRecord]:
    return [UserRecord.from_dict(row) for row in read_jsonl(path)]


def write_pool(path: str | Path, users: Iterable[UserRecord]) -> None:
    from .jsonl import write_jsonl

    write_jsonl(path, (u.to_dict() for u in users))
