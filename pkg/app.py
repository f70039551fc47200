# app.py
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import click
from marshmallow import ValidationError

from Conditions.conditions import classify_regime, evaluate_all
from Conditions.discrete import DISCRETE_COMBINATIONS, discrete_bound
from Core.copson_core import check_admissible
from Discretizer.discretizer import build_sequence, verify_sequence
from Experiments.experiments import (
    DEFAULT_N_LIST, finiteness_dichotomy, regime_family, run_counterexample, run_equivalence_sweep,
    summarize_sweep,
)
from Models.copson_experiments import DichotomyCaseSchema, FamilySpecSchema
from Models.copson_grid import GridSpec
from Models.copson_problem import ProblemSchema
from Models.copson_reports import (
    CEstimateSchema, ConditionReportSchema, CounterexampleTableSchema, DichotomyResultSchema,
    DiscreteConditionValueSchema, SweepRecordSchema,
)
from Models.copson_sequence import DiscretizingSequenceSchema, VerificationReportSchema
from Persistence.persistence import (
    COUNTEREXAMPLE_COLUMNS, SWEEP_COLUMNS, canonical_json, compare_with_baseline, make_envelope,
    read_baseline, write_baseline, write_report, write_table,
)
from Variational.variational import estimate_C
from config import load_config
from utils import (
    InvalidInputError, handle_cli_error, json_pointer_message, success_payload, validate_positive,
    validate_required_fields, validate_tolerance,
)

logger = logging.getLogger(__name__)


def _relative_change(a, b):
    if a == b:
        return 0.0
    try:
        return abs(b - a) / abs(a)
    except ZeroDivisionError:
        return float('inf')


def read_json(path):
    """Lit un document JSON; les erreurs de syntaxe sont localisées"""
    text = Path(path).read_text(encoding='utf-8')
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidInputError(json_pointer_message(e, text))


def load_problem(path, cfg, t_min=None, t_max=None, ppd=None):
    """Problème JSON avec la grille de la configuration et les surcharges de la ligne de commande"""
    data = read_json(path)
    validate_required_fields(data, ('params', 'weights'))
    grid = dict(data.get('grid') or {
        't_min': cfg.GRID_T_MIN, 't_max': cfg.GRID_T_MAX, 'points_per_decade': cfg.GRID_PPD,
    })
    for key, value in (('t_min', t_min), ('t_max', t_max), ('points_per_decade', ppd)):
        if value is not None:
            grid[key] = value
    data['grid'] = grid
    try:
        return ProblemSchema().load(data)
    except ValidationError as e:
        raise InvalidInputError(f"Problème invalide: {e.messages}")


def _output_path(cfg, output, default_name):
    return Path(output) if output else Path(cfg.OUTPUT_DIR) / default_name


def _emit(cfg, payload, path, message):
    write_report(make_envelope(payload, cfg), path)
    click.echo(canonical_json(success_payload({'output': str(path)}, message)))


@handle_cli_error
def run_check(cfg, options):
    problem = load_problem(options['input'], cfg, options['grid_tmin'], options['grid_tmax'], options['ppd'])
    tol = validate_tolerance(options['tol'] or cfg.QUAD_REL_TOL)
    report = evaluate_all(problem, tol, truncation=True, domain_factor=cfg.DOMAIN_FACTOR,
                          probe_factor=cfg.PROBE_FACTOR, probe_steps=cfg.PROBE_STEPS)
    payload = {'problem': ProblemSchema().dump_problem(problem), 'report': ConditionReportSchema().dump(report)}
    if options['refine']:
        fine = evaluate_all(problem.with_grid(problem.grid.refined()), tol, truncation=False,
                            probe_factor=cfg.PROBE_FACTOR, probe_steps=cfg.PROBE_STEPS)
        payload['refinement_delta'] = _relative_change(report.theorem_bound.value, fine.theorem_bound.value)
    _emit(cfg, payload, _output_path(cfg, options['output'], 'check.json'), "Conditions évaluées")


@handle_cli_error
def run_discretize(cfg, options):
    problem = load_problem(options['input'], cfg, options['grid_tmin'], options['grid_tmax'], options['ppd'])
    root_tol = validate_tolerance(options['tol'] or max(cfg.ROOT_TOL, 1e-12))
    admissibility = check_admissible(problem, cfg.PROBE_FACTOR, cfg.PROBE_STEPS)
    sequence = build_sequence(problem, root_tol, admissibility=admissibility)
    payload = {'sequence': DiscretizingSequenceSchema().dump(sequence)}
    if options['check']:
        report = verify_sequence(problem, sequence, root_tol=max(root_tol, 1e-8),
                                 phi_at_infinity=admissibility.phi_power_at_infinity)
        payload['verification'] = VerificationReportSchema().dump(report)
        label = classify_regime(problem.params).label
        if label in DISCRETE_COMBINATIONS:
            total, values = discrete_bound(problem, sequence, label)
            payload['discrete'] = {
                'regime': label,
                'value': total,
                'conditions': [DiscreteConditionValueSchema().dump(v) for v in values.values()],
            }
    _emit(cfg, payload, _output_path(cfg, options['output'], 'sequence.json'), "Suite construite")


@handle_cli_error
def run_estimate_c(cfg, options):
    problem = load_problem(options['input'], cfg, options['grid_tmin'], options['grid_tmax'], options['ppd'])
    budget = cfg.ASCENT_BUDGET if options['budget'] is None else options['budget']
    estimate = estimate_C(problem, budget=budget, max_seeds=cfg.ASCENT_MAX_SEEDS,
                          sub_cells=cfg.SUB_CELLS, left_tail_decades=cfg.LEFT_TAIL_DECADES)
    payload = {'problem': ProblemSchema().dump_problem(problem), 'estimate': CEstimateSchema().dump(estimate)}
    if options['refine']:
        fine = estimate_C(problem.with_grid(problem.grid.refined()), budget=budget,
                          max_seeds=cfg.ASCENT_MAX_SEEDS, sub_cells=cfg.SUB_CELLS,
                          left_tail_decades=cfg.LEFT_TAIL_DECADES)
        payload['refinement_delta'] = _relative_change(estimate.lower_bound, fine.lower_bound)
    _emit(cfg, payload, _output_path(cfg, options['output'], 'estimate.json'), "Minorant de C calculé")


def _grid_from(cfg, options):
    return GridSpec(
        options['grid_tmin'] or cfg.GRID_T_MIN,
        options['grid_tmax'] or cfg.GRID_T_MAX,
        options['ppd'] or cfg.GRID_PPD,
    )


@handle_cli_error
def run_sweep(cfg, options):
    if options['input']:
        try:
            family = FamilySpecSchema().load(read_json(options['input']))
        except ValidationError as e:
            raise InvalidInputError(f"Famille invalide: {e.messages}")
    else:
        family = regime_family(options['regime'])
    budget = cfg.ASCENT_BUDGET if options['budget'] is None else options['budget']
    records = run_equivalence_sweep(
        family, options['count'], seed=options['seed'], grid=_grid_from(cfg, options), budget=budget,
        max_seeds=cfg.ASCENT_MAX_SEEDS, rel_tol=validate_tolerance(options['tol'] or cfg.QUAD_REL_TOL),
        refine=options['refine'], workers=cfg.SWEEP_WORKERS,
    )
    path = _output_path(cfg, options['output'], 'sweep.csv')
    write_table([asdict(r) for r in records], path, SWEEP_COLUMNS)
    rows = [SweepRecordSchema().dump(r) for r in records]
    summary = summarize_sweep(records)
    payload = {'records': rows, 'summary': summary}
    if options['baseline']:
        widths = {regime: entry['width'] for regime, entry in summary.items() if entry['width'] is not None}
        if options['record_baseline']:
            write_baseline(widths, options['baseline'], cfg)
        else:
            payload['baseline'] = compare_with_baseline(widths, read_baseline(options['baseline']))
    _emit(cfg, payload, path.with_suffix('.json'), f"Balayage de {len(records)} problèmes")


@handle_cli_error
def run_counterexample_cmd(cfg, options):
    p, q, m = options['p'], options['q'], options['m']
    n_list = tuple(options['n']) or DEFAULT_N_LIST
    budget = 0 if options['budget'] is None else options['budget']
    table = run_counterexample(p, q, m, n_list, grid=_grid_from(cfg, options), budget=budget,
                               max_seeds=cfg.ASCENT_MAX_SEEDS,
                               rel_tol=validate_tolerance(options['tol'] or cfg.QUAD_REL_TOL))
    path = _output_path(cfg, options['output'], 'counterexample.csv')
    write_table([asdict(row) for row in table.rows], path, COUNTEREXAMPLE_COLUMNS)
    _emit(cfg, CounterexampleTableSchema().dump(table), path.with_suffix('.json'),
          f"Contre-exemple sur {len(table.rows)} valeurs de n")


@handle_cli_error
def run_dichotomy(cfg, options):
    data = read_json(options['input'])
    try:
        cases = DichotomyCaseSchema(many=True).load(data.get('cases', []) if isinstance(data, dict) else data)
    except ValidationError as e:
        raise InvalidInputError(f"Cas invalides: {e.messages}")
    budget = 0 if options['budget'] is None else options['budget']
    results = finiteness_dichotomy(cases, levels=options['levels'], budget=budget,
                                   max_seeds=cfg.ASCENT_MAX_SEEDS)
    payload = {'results': DichotomyResultSchema(many=True).dump(results),
               'passed': all(r.passed for r in results)}
    _emit(cfg, payload, _output_path(cfg, options['output'], 'dichotomy.json'),
          f"{len(results)} cas classés")


def _positive(ctx, param, value):
    if value is None:
        return None
    try:
        return validate_positive(value, param.name)
    except InvalidInputError as e:
        raise click.BadParameter(str(e))


def common_options(func):
    """Options partagées par les sous-commandes"""
    options = [
        click.option('--output', type=click.Path(dir_okay=False), default=None, help="Fichier de sortie"),
        click.option('--grid-tmin', type=float, default=None, callback=_positive, help="Borne gauche de la grille"),
        click.option('--grid-tmax', type=float, default=None, callback=_positive, help="Borne droite de la grille"),
        click.option('--ppd', type=click.IntRange(min=1), default=None, help="Points par décade"),
        click.option('--tol', type=float, default=None, help="Tolérance dans [1e-12, 1e-2]"),
        click.option('--budget', type=click.IntRange(min=0), default=None, help="Budget de montée"),
        click.option('--seed', type=int, default=0, show_default=True, help="Graine aléatoire"),
        click.option('--refine', is_flag=True, help="Relance à densité doublée et rapporte les écarts"),
        click.option('--config', 'config_name', default=None, help="Environnement de configuration"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _config(ctx, options):
    name = options.pop('config_name', None)
    return load_config(name) if name else ctx.obj


def create_app(config_name=None):
    cfg = load_config(config_name)

    # Configuration du logging
    logging.basicConfig(
        level=getattr(logging, cfg.LOG_LEVEL, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    @click.group()
    @click.pass_context
    def cli(ctx):
        """Inégalité de Copson itérée à poids: conditions, discrétisation et estimation de C"""
        ctx.obj = cfg

    @cli.command()
    @click.option('--input', 'input', required=True, help="Fichier problème JSON")
    @common_options
    @click.pass_context
    def check(ctx, **options):
        """Évalue le régime et les conditions A du problème"""
        ctx.exit(run_check(_config(ctx, options), options))

    @cli.command()
    @click.option('--input', 'input', required=True, help="Fichier problème JSON")
    @click.option('--check', 'check', is_flag=True, help="Vérifie la suite et évalue les conditions D")
    @common_options
    @click.pass_context
    def discretize(ctx, **options):
        """Construit la suite discrétisante sur la fenêtre de la grille"""
        ctx.exit(run_discretize(_config(ctx, options), options))

    @cli.command('estimate-c')
    @click.option('--input', 'input', required=True, help="Fichier problème JSON")
    @common_options
    @click.pass_context
    def estimate_c(ctx, **options):
        """Minorant variationnel de la constante optimale"""
        ctx.exit(run_estimate_c(_config(ctx, options), options))

    @cli.command()
    @click.option('--input', 'input', default=None, help="Famille JSON (sinon --regime)")
    @click.option('--regime', type=click.Choice(['a', 'b', 'c', 'd']), default='a', show_default=True)
    @click.option('--count', type=click.IntRange(min=0), default=20, show_default=True)
    @click.option('--baseline', type=click.Path(dir_okay=False), default=None, help="Ligne de base des enveloppes")
    @click.option('--record-baseline', is_flag=True, help="Enregistre la ligne de base au lieu de comparer")
    @common_options
    @click.pass_context
    def sweep(ctx, **options):
        """Balayage d'équivalence sur une famille de problèmes tirés au hasard"""
        ctx.exit(run_sweep(_config(ctx, options), options))

    @cli.command()
    @click.option('--p', 'p', type=float, default=2.0, show_default=True)
    @click.option('--q', 'q', type=float, default=0.5, show_default=True)
    @click.option('--m', 'm', type=float, default=0.75, show_default=True)
    @click.option('--n', 'n', type=int, multiple=True, help="Valeurs de n (par défaut 1, 10, 100, 1000)")
    @common_options
    @click.pass_context
    def counterexample(ctx, **options):
        """Table du contre-exemple: A6 diverge, C reste borné"""
        ctx.exit(run_counterexample_cmd(_config(ctx, options), options))

    @cli.command()
    @click.option('--input', 'input', required=True, help="Liste de cas JSON")
    @click.option('--levels', type=click.IntRange(min=2), default=3, show_default=True)
    @common_options
    @click.pass_context
    def dichotomy(ctx, **options):
        """Finitude de C sous élargissement de la fenêtre, comparée à l'analyse des exposants"""
        ctx.exit(run_dichotomy(_config(ctx, options), options))

    return cli


if __name__ == '__main__':
    create_app()()
