"""Batch command line: ``nvbehavior {synth,detect,calibrate,report}``.

Input layout (as written by ``synth``)::

    <input>/participants.csv          participant,label
    <input>/<pid>/frames.csv          timestamp + channel columns
    <input>/<pid>/segments.csv        part,mode,start,stop
    <input>/<pid>/annotations.csv     annotator,behavior,start,stop (optional)

``detect`` writes one bundle per participant under ``<out>/<pid>/``;
``report`` reads those bundles.  Exit codes: 0 success, 1 usage/config
error or nothing to process, 2 partial failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Sequence

import numpy as np
import yaml

from . import ingest
from .aggregate import LONG_COLUMNS, percent_time
from .binarizer import binarize, sweep_thresholds
from .classifier import ParticipantFeatures, aggregate_features, lopo_cv, train_boost, stack_features
from .config import RunConfig, load_config
from .data_model import BEHAVIORS, BehaviorTrack, FrameSeries, Unit, ValidationError
from .events_agreement import (
    consensus_track, frame_kappa, frames_to_instances, instance_agreement, majority_vote,
)
from .gaze_geometry import gaze_to_screen
from .nod_detector import NodParams, detect_nods
from .stats_suite import Design, compare_parts

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL = 0, 1, 2

TRACKS_FILE = "tracks.csv"
INSTANCES_FILE = "instances.csv"
DIAGNOSTICS_FILE = "nod_diagnostics.csv"
FEATURES_FILE = "features.csv"
ANNOTATOR_PREFIX = "annotator:"  # source prefix marking human annotator tracks


class CliError(Exception):
    """Usage or configuration problem; reported on stderr with exit code 1."""


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def _csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(out_dir: str, files: dict[str, str]) -> None:
    for rel, text in files.items():
        path = os.path.join(out_dir, rel)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _config_echo(config: RunConfig) -> str:
    """Effective config; ``workers`` is left out since it never changes results."""
    d = config.to_dict()
    d.pop("workers", None)
    return yaml.safe_dump(d, sort_keys=True)


def _map(fn: Callable, items: list, workers: int) -> list:
    """Order-preserving map, in worker processes when ``workers > 1``."""
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(items))) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


# -- discovery -------------------------------------------------------------------

def discover(input_dir: str, only: str | None = None) -> list[tuple[str, int | None]]:
    """``(participant_id, label)`` sorted by id."""
    if not os.path.isdir(input_dir):
        raise CliError(f"input directory not found: {input_dir}")
    plist = os.path.join(input_dir, ingest.PARTICIPANTS_FILE)
    if os.path.exists(plist):
        try:
            labels = ingest.parse_participants(plist)
        except ValidationError as exc:
            raise CliError(str(exc)) from None
    else:
        labels = {d: None for d in os.listdir(input_dir)
                  if os.path.isdir(os.path.join(input_dir, d))}
    found = sorted(labels.items())
    if only is not None:
        found = [(p, lab) for p, lab in found if p == only]
    if not found:
        raise CliError("no sessions found")
    return found


# -- detect ------------------------------------------------------------------------

def _likelihood_track(series: FrameSeries, thr: float, behavior: str, source: str,
                      polarity: str = "presence") -> BehaviorTrack:
    return binarize(series, thr, behavior=behavior, source=source, polarity=polarity)


def annotator_tracks(bundle: ingest.SessionBundle, behavior: str) -> list[BehaviorTrack]:
    return [t.replace(source=ANNOTATOR_PREFIX + t.source)
            for t in ingest.annotation_tracks(bundle, behavior)]


def reference_tracks(ann: list[BehaviorTrack], quorum: int) -> list[BehaviorTrack]:
    """Majority vote (>= 2 annotators) and consensus (exactly 2) tracks."""
    out = []
    if len(ann) >= 2:
        out.append(majority_vote(ann, min(quorum, len(ann)), source="majority"))
    if len(ann) == 2:
        out.append(consensus_track(ann[0], ann[1], source="consensus"))
    return out


def detect_participant(bundle: ingest.SessionBundle, config: RunConfig):
    """Algorithm tracks, nod detection result and annotation-derived tracks."""
    s = bundle.session
    tracks: list[BehaviorTrack] = []
    nod = None
    if "pitch" in s.channels and "yaw" in s.channels:
        nod = detect_nods(s.channels["pitch"], s.channels["yaw"], config.nod, s.participant_id)
        tracks.append(nod.track)
    if "au12_likelihood" in s.channels:
        tracks.append(_likelihood_track(s.channels["au12_likelihood"], config.thresholds.smile,
                                        "smile", "au12"))
    if "eye_contact_score" in s.channels:
        tracks.append(_likelihood_track(s.channels["eye_contact_score"], config.thresholds.eye_contact,
                                        "gaze_off", "eye_contact", polarity="contact"))
    margin = gaze_margin_series(s, config)
    if margin is not None:
        tracks.append(_likelihood_track(margin, config.thresholds.gaze_margin,
                                        "gaze_off", "gaze_geometry"))
    for behavior in BEHAVIORS:
        ann = annotator_tracks(bundle, behavior)
        tracks += ann + reference_tracks(ann, config.events.quorum)
    return tracks, nod


def gaze_margin_series(session, config: RunConfig) -> FrameSeries | None:
    ch = session.channels
    if "gaze_angle_x" not in ch or "gaze_angle_y" not in ch:
        return None
    gx, gy = ch["gaze_angle_x"], ch["gaze_angle_y"]
    g = config.geometry
    proj = gaze_to_screen(gx.values, gy.values, g.screen(), timestamps=session.timestamps,
                          valid=gx.valid & gy.valid, participant_id=session.participant_id,
                          tolerance_mm=g.tolerance_mm, score_slope=g.score_slope,
                          flip_x=g.flip_x, flip_y=g.flip_y)
    score = np.where(np.isfinite(proj.margin_score), proj.margin_score, np.nan)
    return FrameSeries(session.participant_id, "gaze_margin", session.timestamps, score,
                       unit=Unit.LIKELIHOOD, valid=gx.valid & gy.valid)


def tracks_csv(tracks: list[BehaviorTrack]) -> str:
    """Wide table: one ``behavior|source`` column per track; blank = invalid frame."""
    t = tracks[0].timestamps
    header = ["timestamp"] + [f"{tr.behavior}|{tr.source}" for tr in tracks]
    cols = [[repr(float(v)) for v in t]]
    for tr in tracks:
        cols.append(["" if not ok else str(int(v)) for v, ok in zip(tr.frames, tr.valid)])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(zip(*cols))
    return buf.getvalue()


def parse_tracks(path: str, participant_id: str) -> list[BehaviorTrack]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2 or rows[0][0] != "timestamp":
        raise ValidationError(f"{path}: not a tracks file")
    header, body = rows[0], rows[1:]
    t = np.array([float(r[0]) for r in body])
    out = []
    for j, name in enumerate(header[1:], start=1):
        behavior, source = name.split("|", 1)
        cells = [r[j] for r in body]
        valid = np.array([c != "" for c in cells])
        frames = np.array([int(c) if c else 0 for c in cells], dtype=np.int8)
        out.append(BehaviorTrack(participant_id, behavior, source, t, frames, valid))
    return out


def _instances_csv(tracks: list[BehaviorTrack], config: RunConfig) -> str:
    rows = []
    for tr in tracks:
        for inst in frames_to_instances(tr, config.events.merge_gap_s, config.events.min_duration_s):
            rows.append((tr.behavior, tr.source, inst.start_s, inst.end_s))
    return _csv(["behavior", "source", "start", "stop"], rows)


def features_csv(feats: list[ParticipantFeatures]) -> str:
    names = feats[0].names
    return _csv(["participant", "label"] + list(names),
                [[f.participant_id, "" if f.label is None else f.label] + list(f.values) for f in feats])


def parse_features(path: str) -> list[ParticipantFeatures]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    names = tuple(header[2:])
    return [ParticipantFeatures(r[0], names, np.array([float(v) for v in r[2:]]),
                                None if r[1] == "" else int(r[1])) for r in rows[1:]]


def _detect_job(job):
    input_dir, pid, label, config = job
    try:
        bundle = ingest.load_session(os.path.join(input_dir, pid), pid, config, label)
        tracks, nod = detect_participant(bundle, config)
        files = {
            f"{pid}/{TRACKS_FILE}": tracks_csv(tracks),
            f"{pid}/{INSTANCES_FILE}": _instances_csv(tracks, config),
            f"{pid}/{ingest.SEGMENTS_FILE}": ingest.serialize_segmentation(bundle.session.segmentation),
        }
        if nod is not None:
            files[f"{pid}/{DIAGNOSTICS_FILE}"] = nod.diagnostics_csv()
        chans = config.classifier.channels
        if all(c in bundle.session.channels for c in chans):
            files[f"{pid}/{FEATURES_FILE}"] = features_csv(
                [aggregate_features(bundle.session, chans, label)])
        return pid, files, None
    except (ValidationError, ValueError, OSError, KeyError) as exc:
        return pid, {}, f"{type(exc).__name__}: {exc}"


def cmd_detect(config: RunConfig, input_dir: str, out_dir: str, only: str | None = None) -> int:
    sessions = discover(input_dir, only)
    jobs = [(input_dir, pid, label, config) for pid, label in sessions]
    results = _map(_detect_job, jobs, config.workers)
    ok = [(pid, files) for pid, files, err in results if err is None]
    failed = [(pid, err) for pid, _, err in results if err is not None]
    for pid, files in ok:
        _write(out_dir, files)
    labels = dict(sessions)
    _write(out_dir, {
        ingest.PARTICIPANTS_FILE: _csv(["participant", "label"],
                                       [(p, "" if labels[p] is None else labels[p]) for p, _ in ok]),
        "detect_errors.csv": _csv(["participant", "error"], failed),
        "config.yaml": _config_echo(config),
    })
    for pid, err in failed:
        print(f"detect: skipped {pid}: {err}", file=sys.stderr)
    print(f"detect: {len(ok)} participant(s) written, {len(failed)} skipped")
    if not ok:
        return EXIT_USAGE
    return EXIT_PARTIAL if failed else EXIT_OK


# -- calibrate ---------------------------------------------------------------------

def _load_bundles(input_dir: str, only: str | None, config: RunConfig):
    bundles, failed = [], []
    for pid, label in discover(input_dir, only):
        try:
            bundles.append(ingest.load_session(os.path.join(input_dir, pid), pid, config, label))
        except (ValidationError, ValueError, OSError) as exc:
            failed.append((pid, str(exc)))
    return bundles, failed


def _nod_grid(config: RunConfig) -> list[NodParams]:
    g = config.nod_grid
    out = []
    for c, pf, dr, lo, hi in itertools.product(g.amplitude_coeff, g.prominence_frac, g.dominance_ratio,
                                               g.min_duration_s, g.max_duration_s):
        try:
            out.append(replace(config.nod, amplitude_coeff=c, prominence_frac=pf,
                               dominance_ratio=dr, min_duration_s=lo, max_duration_s=hi))
        except ValidationError:
            continue
    return out


def _grid_key(p: NodParams) -> tuple:
    return (p.amplitude_coeff, p.prominence_frac, p.dominance_ratio, p.min_duration_s, p.max_duration_s)


def _grid_job(job):
    params, refs = job
    dice = []
    for pitch, yaw, ref in refs:
        det = detect_nods(pitch, yaw, params)
        dice.append(instance_agreement(ref, det.instances).dice_agreement)
    return float(np.mean(dice))


def cmd_calibrate(config: RunConfig, input_dir: str, out_dir: str, only: str | None = None) -> int:
    bundles, failed = _load_bundles(input_dir, only, config)
    if not bundles:
        raise CliError("no sessions could be loaded")
    if not any(b.annotations for b in bundles):
        raise CliError("no annotations found")
    grid = config.sweep.grid()
    files: dict[str, str] = {}
    calib: dict = {"thresholds": {}}
    summary = []

    def sweep(behavior, get_series, polarity, key, name):
        series, anns = [], []
        for b in bundles:
            s = get_series(b.session)
            ann = ingest.annotation_tracks(b, behavior)
            if s is not None and ann:
                series.append(s)
                anns.append(ann)
        if not series:
            summary.append(f"{name}: no annotated participants, skipped")
            return
        res = sweep_thresholds(series, anns, grid, polarity=polarity, pooled=config.sweep.pooled)
        files[f"sweep_{name}.csv"] = res.to_csv()
        calib["thresholds"][key] = res.best_threshold
        summary.append(f"{name}: best threshold {res.best_threshold!r} "
                       f"(mean kappa {res.best_mean_kappa:.4f}, {len(series)} participants)")

    sweep("smile", lambda s: s.channels.get("au12_likelihood"), "presence", "smile", "smile")
    sweep("gaze_off", lambda s: s.channels.get("eye_contact_score"), "contact",
          "eye_contact", "eye_contact")
    sweep("gaze_off", lambda s: gaze_margin_series(s, config), "presence",
          "gaze_margin", "gaze_geometry")

    refs = []
    for b in bundles:
        ch = b.session.channels
        ann = ingest.annotation_tracks(b, "nod")
        if not ann or "pitch" not in ch or "yaw" not in ch:
            continue
        ref = ann[0] if len(ann) == 1 else majority_vote(ann, min(config.events.quorum, len(ann)))
        ref_inst = frames_to_instances(ref, config.events.merge_gap_s, config.events.min_duration_s)
        refs.append((ch["pitch"], ch["yaw"], ref_inst))
    if refs:
        params = _nod_grid(config)
        if not params:
            raise CliError("nod grid is empty after validation")
        scores = _map(_grid_job, [(p, refs) for p in params], config.workers)
        rows = sorted(zip(params, scores), key=lambda ps: _grid_key(ps[0]))
        files["nod_grid.csv"] = _csv(
            ["amplitude_coeff", "prominence_frac", "dominance_ratio", "min_duration_s",
             "max_duration_s", "mean_dice"], [_grid_key(p) + (s,) for p, s in rows])
        # highest objective; ties go to the lexicographically smallest parameters
        best, best_score = min(rows, key=lambda ps: (-ps[1], _grid_key(ps[0])))
        calib["nod"] = dict(zip(("amplitude_coeff", "prominence_frac", "dominance_ratio",
                                 "min_duration_s", "max_duration_s"), _grid_key(best)))
        summary.append(f"nod grid: best mean instance agreement {best_score:.4f} at "
                       f"{calib['nod']} over {len(refs)} participants")
    else:
        summary.append("nod grid: no nod annotations, skipped")
    if not calib["thresholds"] and "nod" not in calib:
        raise CliError("no overlap between annotations and frame channels")
    if not calib["thresholds"]:
        del calib["thresholds"]
    files["calibration.yaml"] = yaml.safe_dump(calib, sort_keys=True)
    files["calibration_summary.txt"] = "\n".join(summary) + "\n"
    _write(out_dir, files)
    for pid, err in failed:
        print(f"calibrate: skipped {pid}: {err}", file=sys.stderr)
    print("\n".join(summary))
    return EXIT_PARTIAL if failed else EXIT_OK


# -- report ------------------------------------------------------------------------

def _is_annotator(source: str) -> bool:
    return source.startswith(ANNOTATOR_PREFIX)


def _agreement_rows(pid: str, tracks: list[BehaviorTrack], config: RunConfig):
    rows = []
    ev = config.events
    for behavior in BEHAVIORS:
        mine = [t for t in tracks if t.behavior == behavior]
        ann = [t for t in mine if _is_annotator(t.source)]
        algo = [t for t in mine if not _is_annotator(t.source) and t.source not in ("majority", "consensus")]
        ref = next((t for t in mine if t.source == "majority"), ann[0] if len(ann) == 1 else None)
        pairs = list(itertools.combinations(ann, 2))
        if ref is not None:
            pairs += [(a, ref) for a in algo]
        for a, b in pairs:
            try:
                rep = frame_kappa(a, b)
            except ValidationError:
                continue
            ia = instance_agreement(frames_to_instances(a, ev.merge_gap_s, ev.min_duration_s),
                                    frames_to_instances(b, ev.merge_gap_s, ev.min_duration_s))
            rows.append((pid, behavior, a.source, b.source, rep.n_frames, rep.observed_agreement,
                         rep.expected_agreement, rep.kappa, ia.n_a, ia.n_b, len(ia.pairs),
                         ia.dice_agreement))
    return rows


AGREEMENT_COLUMNS = ("participant", "behavior", "source_a", "source_b", "n_frames", "p_o", "p_e",
                     "kappa", "instances_a", "instances_b", "matched", "dice")
STATS_COLUMNS = ("behavior", "source", "comparison", "test", "statistic", "dof", "n", "p",
                 "p_corrected", "alternative", "exact", "note")


def _percent_rows(pid: str, tracks: list[BehaviorTrack], seg, config: RunConfig):
    rows = []
    for tr in tracks:
        mask = None
        if config.events.consensus_only:
            cons = next((t for t in tracks if t.behavior == tr.behavior and t.source == "consensus"), None)
            if cons is not None:
                mask = cons.valid
        rows += [r.as_tuple() for r in percent_time(tr, seg, mask)]
    return rows


def _report_job(job):
    art_dir, pid, config = job
    d = os.path.join(art_dir, pid)
    try:
        tracks = parse_tracks(os.path.join(d, TRACKS_FILE), pid)
        seg = ingest.parse_segmentation(os.path.join(d, ingest.SEGMENTS_FILE))
        feats = None
        fpath = os.path.join(d, FEATURES_FILE)
        if os.path.exists(fpath):
            feats = parse_features(fpath)[0]
        return pid, _agreement_rows(pid, tracks, config), _percent_rows(pid, tracks, seg, config), feats, None
    except (ValidationError, ValueError, OSError, KeyError, IndexError) as exc:
        return pid, [], [], None, f"{type(exc).__name__}: {exc}"


def _stats_rows(percent: list[tuple], config: RunConfig) -> list[tuple]:
    st = config.stats
    dict_rows = [dict(zip(LONG_COLUMNS, r)) for r in percent]
    out = []
    for comp in st.comparisons:
        design = Design(kind=comp.kind, benchmark=comp.benchmark, alternative=comp.alternative,
                        routing=st.routing, posthoc=st.posthoc, alpha=st.alpha)
        if comp.source is not None:
            sources = [comp.source]
        else:
            sources = sorted({r["source"] for r in dict_rows
                              if r["behavior"] == comp.behavior and not _is_annotator(r["source"])})
        for source in sources:
            try:
                results = compare_parts(dict_rows, comp.behavior, design, source)
            except ValueError as exc:
                out.append((comp.behavior, source, comp.kind, "skipped", math.nan, "", 0,
                            math.nan, math.nan, "", "", str(exc)))
                continue
            for r in results:
                dof = "" if r.dof is None else " ".join(_fmt(float(x)) for x in r.dof)
                out.append((comp.behavior, source, r.comparison, r.test_name, r.statistic, dof, r.n,
                            r.p_value, r.p_corrected, r.alternative, str(r.exact).lower(), r.note))
    return out


def cmd_report(config: RunConfig, art_dir: str, out_dir: str, only: str | None = None) -> int:
    sessions = discover(art_dir, only)
    results = _map(_report_job, [(art_dir, pid, config) for pid, _ in sessions], config.workers)
    failed = [(pid, err) for pid, *_, err in results if err is not None]
    ok = [r for r in results if r[-1] is None]
    if not ok:
        raise CliError("missing upstream artifacts: run detect first")
    agreement = [row for r in ok for row in r[1]]
    percent = [row for r in ok for row in r[2]]
    labels = dict(sessions)
    feats = [replace(r[3], label=labels.get(r[0])) for r in ok if r[3] is not None]

    files = {
        "agreement.csv": _csv(AGREEMENT_COLUMNS, agreement),
        "percent_time.csv": _csv(LONG_COLUMNS, percent),
    }
    summary = [f"participants: {len(ok)} reported, {len(failed)} skipped"]
    for pid, err in failed:
        summary.append(f"  skipped {pid}: {err}")

    if agreement:
        summary.append("")
        summary.append("agreement (mean over participants): behavior, source_a vs source_b, kappa, dice")
        keys = sorted({(r[1], r[2], r[3]) for r in agreement})
        for k in keys:
            sel = [r for r in agreement if (r[1], r[2], r[3]) == k]
            summary.append(f"  {k[0]:8s} {k[1]} vs {k[2]}: kappa {np.mean([r[7] for r in sel]):.3f}, "
                           f"dice {np.mean([r[11] for r in sel]):.3f} (n={len(sel)})")

    if config.stats.enabled:
        stats = _stats_rows(percent, config)
        files["stats.csv"] = _csv(STATS_COLUMNS, stats)
        summary.append("")
        summary.append("statistics: behavior, source, comparison, test, statistic, p, p_corrected")
        for r in stats:
            summary.append(f"  {r[0]:8s} {r[1]:14s} {r[2]:40s} {r[3]:22s} "
                           f"stat={_short(r[4])} p={_short(r[7])} p_corr={_short(r[8])}")
    else:
        summary.append("")
        summary.append("statistics: disabled")

    summary.append("")
    if not config.classifier.enabled:
        summary.append("classification: disabled")
    else:
        summary += _classify(feats, config, files)

    files["summary.txt"] = "\n".join(summary) + "\n"
    _write(out_dir, files)
    print(files["summary.txt"], end="")
    return EXIT_PARTIAL if failed else EXIT_OK


def _short(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.4g}"
    return str(v)


def _classify(feats: list[ParticipantFeatures], config: RunConfig, files: dict) -> list[str]:
    labelled = [f for f in feats if f.label is not None]
    cc = config.classifier
    try:
        if len(labelled) < 3:
            raise ValidationError(f"lopo_cv needs at least 3 labelled participants, got {len(labelled)}")
        seeds = cc.seed_list(config.seed)
        cv = lopo_cv(labelled, cc.boost_params(), seeds, workers=config.workers, rebalance=cc.rebalance)
    except ValidationError as exc:
        print(f"report: classification refused: {exc}", file=sys.stderr)
        return [f"classification: refused ({exc})"]
    X, y, names = stack_features(labelled)
    files["features.csv"] = features_csv(labelled)
    files["classification_scores.csv"] = _csv(
        ["participant", "label", "seed", "score"],
        [(pid, int(lab), s, float(cv.scores[s][i]))
         for s in seeds for i, (pid, lab) in enumerate(zip(cv.participant_ids, cv.labels))])
    files["classification_auc.csv"] = _csv(["seed", "auc"], [(s, cv.auc_per_seed[s]) for s in seeds])
    model = train_boost(X, y, cc.boost_params(seeds[0]), names)
    files["model.json"] = model.to_json() + "\n"
    lo, hi = cv.auc_range
    lines = [f"classification: LOPO over {len(labelled)} participants "
             f"({int(np.sum(y == 1))} label-1, {int(np.sum(y == 0))} label-0), {len(names)} features",
             f"  AUC mean {cv.mean_auc:.4f}, SD {cv.sd_auc:.4f}, range [{lo:.4f}, {hi:.4f}] "
             f"over {len(seeds)} seed(s)"]
    if cv.skipped:
        lines.append(f"  folds skipped (single-class training set): {', '.join(cv.skipped)}")
    return lines


# -- synth -------------------------------------------------------------------------

def cmd_synth(config: RunConfig, out_dir: str) -> int:
    from .synth import SynthSpec, generate_cohort, write_cohort
    try:
        spec = SynthSpec.from_mapping(config.synth)
    except TypeError as exc:
        raise CliError(f"invalid synth spec: {exc}") from None
    cohort = generate_cohort(spec, config.seed)
    write_cohort(cohort, out_dir, spec, config.seed)
    print(f"synth: {len(cohort)} participant(s) written to {out_dir}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nvbehavior", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "detect": "detect nods, smiles and off-screen gaze per participant",
        "calibrate": "sweep thresholds and grid-search nod parameters against annotations",
        "report": "agreement, percent-time, statistics and classification from detect output",
        "synth": "write a synthetic cohort with planted behaviors",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", action="append", default=[], metavar="PATH",
                       help="YAML config; repeat to layer several files")
        if name != "synth":
            p.add_argument("--input", required=True, metavar="DIR")
        p.add_argument("--out", required=True, metavar="DIR")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        if name != "synth":
            p.add_argument("--only", default=None, metavar="PARTICIPANT_ID")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    try:
        config = load_config(args.config, overrides=overrides)
        if args.command == "synth":
            return cmd_synth(config, args.out)
        cmd = {"detect": cmd_detect, "calibrate": cmd_calibrate, "report": cmd_report}[args.command]
        return cmd(config, args.input, args.out, args.only)
    except (CliError, ValidationError) as exc:
        print(f"nvbehavior {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
