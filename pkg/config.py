import os

from dotenv import load_dotenv

load_dotenv()


def _float(name, default):
    return float(os.environ.get(name, default))


def _int(name, default):
    return int(os.environ.get(name, default))


class Config:
    # Configuration des logs
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')

    # Grille logarithmique de travail sur (0, inf)
    GRID_T_MIN = _float('GRID_T_MIN', 1e-4)
    GRID_T_MAX = _float('GRID_T_MAX', 1e4)
    GRID_PPD = _int('GRID_PPD', 16)

    # Tolérances numériques
    QUAD_REL_TOL = _float('QUAD_REL_TOL', 1e-8)
    ROOT_TOL = _float('ROOT_TOL', 1e-10)

    # Fonctions test: sous-cellules fines et queue gauche (en décades)
    SUB_CELLS = _int('SUB_CELLS', 8)
    LEFT_TAIL_DECADES = _int('LEFT_TAIL_DECADES', 8)

    # Détection de K (phi(inf) fini ou non)
    PROBE_FACTOR = _float('PROBE_FACTOR', 10.0)
    PROBE_STEPS = _int('PROBE_STEPS', 6)

    # Estimation variationnelle de C
    ASCENT_BUDGET = _int('ASCENT_BUDGET', 40)
    ASCENT_MAX_SEEDS = _int('ASCENT_MAX_SEEDS', 4)

    # Expériences
    SWEEP_WORKERS = _int('SWEEP_WORKERS', 1)
    DOMAIN_FACTOR = _float('DOMAIN_FACTOR', 10.0)
    OUTPUT_DIR = os.environ.get('OUTPUT_DIR', 'output')

    # Persistance
    SCHEMA_VERSION = 1


class DevelopmentConfig(Config):
    DEBUG = True


class ProductionConfig(Config):
    DEBUG = False
    GRID_PPD = _int('GRID_PPD', 32)
    QUAD_REL_TOL = _float('QUAD_REL_TOL', 1e-10)
    SUB_CELLS = _int('SUB_CELLS', 16)
    ASCENT_BUDGET = _int('ASCENT_BUDGET', 200)


class TestingConfig(Config):
    TESTING = True
    # Grilles grossières pour garder la suite de tests rapide
    GRID_T_MIN = 1e-3
    GRID_T_MAX = 1e3
    GRID_PPD = 8
    SUB_CELLS = 6
    ASCENT_BUDGET = 10
    ASCENT_MAX_SEEDS = 2
    SWEEP_WORKERS = 1


# Configuration par défaut selon l'environnement
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}


def load_config(config_name=None):
    """Retourne la classe de configuration demandée (COPSON_ENV sinon)"""
    if config_name is None:
        config_name = os.environ.get('COPSON_ENV', 'development')
    if config_name not in config:
        config_name = 'default'
    return config[config_name]
