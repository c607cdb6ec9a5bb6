from .report import EXIT_INCOMPLETE, EXIT_OK, RunReport, sanitize_text, write_run_report_pdf
from .tables import (
    read_schedule,
    write_argmax,
    write_belief_history,
    write_budget,
    write_contour,
    write_info_tensor,
    write_result_summary,
    write_schedule,
    write_separability,
    write_starts,
    write_sweep,
    write_trajectory,
)
