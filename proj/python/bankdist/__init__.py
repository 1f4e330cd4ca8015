try:
    from ._bankdist import (
        BankdistError,
        __version__,
        auc,
        clean_text,
        edit_distance,
        fnv1a_hex,
        match_rules,
        normalize_bank_name,
        run_stage,
        symmetric_growth,
        write_synthetic_inputs,
    )
except ImportError:
    # Build-tree layout: the extension sits next to the package on sys.path.
    from _bankdist import (
        BankdistError,
        __version__,
        auc,
        clean_text,
        edit_distance,
        fnv1a_hex,
        match_rules,
        normalize_bank_name,
        run_stage,
        symmetric_growth,
        write_synthetic_inputs,
    )

__all__ = [
    "BankdistError",
    "__version__",
    "auc",
    "clean_text",
    "edit_distance",
    "fnv1a_hex",
    "match_rules",
    "normalize_bank_name",
    "run_stage",
    "symmetric_growth",
    "write_synthetic_inputs",
]
