import json
import logging
import os
from collections.abc import Mapping
from typing import Optional

import pandas as pd
import streamlit as st

from errors import MetroTimetableError
from formulation.assemble import build_model, describe
from formulation.config import MODEL_IDS
from processors.fixtures import FIXTURES, load_fixture
from processors.flow_sim import finish_time, simulate, trace_frame
from processors.instance_loader import LoadedInstance, build_instance, parse_document
from processors.timetable import check_timetable, timetable_frame, timetable_from_solution
from services.mps import to_mps_text
from services.pareto import frontier_frame, sweep
from services.solution_io import solution_text
from services.solver import ENGINES, SolverOptions, solve
from settings import ENV_VARS, load_settings, with_overrides
from ui.charts import chart_load_profile, chart_pareto_frontier, chart_timetable_diagram
from ui.helptext import HELP
from ui.kpis import compute_kpis

st.set_page_config(page_title="Metro Timetabling", layout="wide")
from ui.theme import apply_theme, hero
apply_theme()

hero(
    "Metro timetabling",
    "Short-turning and skip-stop timetables for a bidirectional line. Mouse over the '?' or the column headers for details.",
)

# Streamlit secrets win over the environment
SETTINGS = load_settings({var: str(st.secrets.get(var, os.getenv(var, ""))) for var in ENV_VARS})
logging.basicConfig(level=getattr(logging, SETTINGS.log_level, logging.INFO), force=True)

# Centering toggle (wizard only)
_CSS_SLOT = st.empty()

def _set_wizard_center(on: bool):
    _CSS_SLOT.markdown(
        f"""
        <style>
        section.main > div.block-container{{
          min-height: {"85vh" if on else "auto"};
          display: {"flex" if on else "block"};
          flex-direction: column;
          justify-content: center;
        }}
        </style>
        """,
        unsafe_allow_html=True,
    )

NOTICE = "Solving runs on this machine. Large lines can take minutes; HiGHS is faster than the built-in solver."


def render_notice(text: str, icon: str = "⏱️") -> None:
    st.markdown(
        f"""
        <div class="callout">
          <span class="callout__icon">{icon}</span>
          <div class="callout__body">{text}</div>
        </div>
        """,
        unsafe_allow_html=True,
    )


def step_header(step: int, title: str, subtitle: str | None = None, emoji: str | None = None) -> None:
    icon = f"{emoji} " if emoji else ""
    st.markdown(
        f"""
        <div class="step-header">
          <span class="step-header__badge">{step}</span>
          <div>
            <div class="step-header__title">{icon}{title}</div>
            {f"<div class='step-header__subtitle'>{subtitle}</div>" if subtitle else ""}
          </div>
        </div>
        """,
        unsafe_allow_html=True,
    )

# ---------------- Caching helpers ----------------
@st.cache_resource(show_spinner=True)
def fetch_fixture(name: str) -> LoadedInstance:
    return load_fixture(name)


@st.cache_resource(show_spinner=True)
def parse_upload(file_bytes: bytes) -> LoadedInstance:
    return build_instance(parse_document(json.loads(file_bytes.decode("utf-8"))))


def _with_help(df: pd.DataFrame, help_text: Mapping[str, str]) -> dict[str, object]:
    return {col: st.column_config.Column(col, help=help_text.get(col, HELP.DEFAULT)) for col in df.columns}


def _options(engine: str, time_limit: float) -> SolverOptions:
    return SolverOptions.from_settings(with_overrides(SETTINGS, engine=engine, time_limit=time_limit))


def run_solve(loaded: LoadedInstance, opts: SolverOptions) -> dict:
    cfg, topo = loaded.cfg, loaded.topo
    _, instance = build_model(cfg, topo, loaded.od, f"{loaded.name}-{cfg.model_id}")
    solution = solve(instance, opts)
    result = {"instance": instance, "solution": solution, "timetable": None, "trace": None, "violations": []}
    if solution.has_incumbent:
        tt = timetable_from_solution(solution, cfg, topo)
        result["timetable"] = tt
        result["violations"] = check_timetable(tt, topo, cfg)
        result["trace"] = simulate(tt, loaded.od, cfg.capacity, cfg.initial_accumulation)
    return result


def run_simulate(loaded: LoadedInstance) -> dict:
    tt = loaded.timetable
    trace = simulate(tt, loaded.od, loaded.cfg.capacity, loaded.cfg.initial_accumulation)
    return {"instance": None, "solution": None, "timetable": tt, "trace": trace, "violations": []}

# ---------------- Wizard UI ----------------
st.session_state.setdefault("step", 1)
_state = st.session_state

with st.sidebar:
    st.markdown("### Controls")
    if st.button("Restart wizard"):
        for k in ["loaded", "results", "frontier"]:
            _state.pop(k, None)
        _state.step = 1
        st.rerun()

_set_wizard_center(_state.step in (1, 2))

# ---- Step 1 ----
if _state.step == 1:
    step_header(
        1,
        "Choose an instance",
        "Pick a bundled line or upload an instance JSON file.",
        emoji="🗺️",
    )
    source = st.radio("Source", ["Bundled fixture", "Upload JSON"], horizontal=True)
    fixture = st.selectbox("Fixture", FIXTURES) if source == "Bundled fixture" else None
    upload = st.file_uploader("Instance JSON", type=["json"]) if source == "Upload JSON" else None

    if st.button("Continue") and (fixture or upload):
        try:
            with st.spinner("Loading instance..."):
                _state["loaded"] = fetch_fixture(fixture) if fixture else parse_upload(upload.getvalue())
                _state.step = 2
                st.rerun()
        except MetroTimetableError as e:
            st.error(f"Instance error: {e}")
        except json.JSONDecodeError as e:
            st.error(f"Not valid JSON: {e}")

# ---- Step 2 ----
elif _state.step == 2:
    loaded: LoadedInstance = _state["loaded"]
    step_header(
        2,
        f"Run {loaded.name}",
        f"{loaded.topo.n} stations per direction, {loaded.cfg.k_up} + {loaded.cfg.k_dn} potential services.",
        emoji="⚙️",
    )
    render_notice(NOTICE)
    model = st.selectbox("Model", MODEL_IDS, index=MODEL_IDS.index(loaded.cfg.model_id))
    engine = st.selectbox("Engine", ENGINES, index=ENGINES.index(SETTINGS.engine), help=HELP.SOLVER_ENGINE)
    time_limit = st.number_input(
        "Time limit (s)", min_value=1.0, value=min(SETTINGS.time_limit, 600.0), help=HELP.SOLVER_TIME_LIMIT
    )

    c1, c2, c3 = st.columns(3)
    solve_clicked = c1.button("Solve", type="primary")
    sim_clicked = c2.button("Simulate embedded timetable", disabled=loaded.timetable is None)
    pareto_clicked = c3.button("Sweep frontier", disabled=not model.startswith("3"))

    try:
        if solve_clicked:
            with st.spinner("Solving..."):
                _state["loaded"] = loaded = loaded.with_model(model)
                _state["results"] = run_solve(loaded, _options(engine, time_limit))
                _state.pop("frontier", None)
                _state.step = 3
                st.rerun()
        if sim_clicked:
            with st.spinner("Simulating passenger flows..."):
                _state["results"] = run_simulate(loaded)
                _state.pop("frontier", None)
                _state.step = 3
                st.rerun()
        if pareto_clicked:
            with st.spinner("Sweeping the frontier..."):
                _state["loaded"] = loaded = loaded.with_model(model)
                _state["frontier"] = sweep(loaded.cfg, loaded.topo, loaded.od, loaded.epsilon, _options(engine, time_limit))
                _state["results"] = None
                _state.step = 3
                st.rerun()
    except MetroTimetableError as e:
        st.error(f"Run failed: {e}")

# ---------------- Dashboard ----------------
if _state.step == 3:
    loaded = _state["loaded"]
    results: Optional[dict] = _state.get("results")
    frontier = _state.get("frontier")
    st.markdown(f"### 📊 {loaded.name} · model {loaded.cfg.model_id}")

    tt = results["timetable"] if results else None
    trace = results["trace"] if results else None
    solution = results["solution"] if results else None

    if results and tt is None:
        st.warning(f"No timetable found (status {solution.status}).")

    if tt is not None:
        kpis = compute_kpis(tt, trace, solution)
        c1, c2, c3, c4, c5 = st.columns(5)
        c1.metric("Services up / down", f"{kpis['Services up']} / {kpis['Services down']}", help=HELP.KPI_SERVICES)
        c2.metric("Short-turn services", kpis["Short-turn services"], help=HELP.KPI_SHORT_TURN)
        c3.metric("Turnarounds", kpis["Turnarounds"], help=HELP.KPI_TURNAROUNDS)
        waiting = kpis.get("Total waiting time")
        c4.metric("Total waiting (pax·s)", f"{waiting:,.0f}" if waiting is not None else "—", help=HELP.KPI_WAITING)
        load = kpis.get("Peak load factor")
        c5.metric("Peak load factor", f"{load:.2f}" if load is not None else "—", help=HELP.KPI_LOAD)

        depots = st.columns(5)
        for col, dp in zip(depots, (1, 2, 3, 4)):
            col.metric(f"Trains from depot {dp}", kpis[f"Trains from depot {dp}"], help=HELP.KPI_TRAINS)
        depots[4].metric("Status", kpis["Status"], help=HELP.KPI_STATUS)
        st.caption(f"Finish time {finish_time(tt):,.0f}s")
        for v in results["violations"]:
            st.warning(f"{v.check}: service {v.service} station {v.station}: {v.detail}")

    tab1, tab2, tab3 = st.tabs(["Tables", "Charts", "Exports"])

    with tab1:
        if tt is not None:
            st.subheader("Timetable")
            tdf = timetable_frame(tt)
            st.dataframe(tdf, width="stretch", column_config=_with_help(tdf, HELP.TIMETABLE_COLUMNS))
        if trace is not None:
            st.subheader("Passenger flows")
            fdf = trace_frame(trace)
            st.dataframe(fdf, width="stretch", column_config=_with_help(fdf, HELP.TRACE_COLUMNS))
        if results and results["instance"] is not None:
            st.subheader("Model summary")
            mdf = describe(results["instance"])
            st.dataframe(mdf, width="stretch", column_config=_with_help(mdf, HELP.MODEL_COLUMNS))
        if frontier:
            st.subheader("Frontier")
            st.dataframe(frontier_frame(frontier, loaded.name), width="stretch")

    with tab2:
        if tt is not None:
            st.plotly_chart(chart_timetable_diagram(tt), width="stretch")
            st.caption(f"ℹ️ {HELP.CHART_DIAGRAM}")
        if trace is not None:
            direction = st.radio("Direction", ["up", "down"], horizontal=True)
            st.plotly_chart(chart_load_profile(trace, direction), width="stretch")
            st.caption(f"ℹ️ {HELP.CHART_LOAD}")
        if frontier:
            st.plotly_chart(chart_pareto_frontier(frontier), width="stretch")
            st.caption(f"ℹ️ {HELP.CHART_PARETO}")
        if tt is None and not frontier:
            st.info("Nothing to plot yet.")

    with tab3:
        def to_csv_bytes(df: pd.DataFrame) -> bytes:
            return df.to_csv(index=False, lineterminator="\n").encode("utf-8")

        if tt is not None:
            st.download_button("Download timetable CSV", to_csv_bytes(timetable_frame(tt)), file_name="timetable.csv")
        if trace is not None:
            st.download_button("Download flow trace CSV", to_csv_bytes(trace_frame(trace)), file_name="trace.csv")
        if solution is not None:
            st.download_button("Download solution", solution_text(solution).encode("utf-8"), file_name="solution.txt")
        if results and results["instance"] is not None:
            st.download_button(
                "Download model (MPS)",
                to_mps_text(results["instance"]).encode("utf-8"),
                file_name=f"{results['instance'].name}.mps",
            )
        if frontier:
            st.download_button(
                "Download frontier CSV", to_csv_bytes(frontier_frame(frontier, loaded.name)), file_name="frontier.csv"
            )
