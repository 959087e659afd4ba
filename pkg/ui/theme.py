# ui/theme.py
from __future__ import annotations

import streamlit as st

# Upstream / downstream accents reused by the step badges and the tab pills.
LINE_UP = "#E4002B"
LINE_DOWN = "#0057B8"


def _palette(is_dark: bool) -> dict[str, str]:
    if is_dark:
        return {
            "surface": "#141a24",
            "subtle": "rgba(148,163,184,.16)",
            "border": "rgba(255,255,255,.12)",
            "muted": "rgba(226,232,240,.8)",
            "page": "linear-gradient(180deg, #0b1018 0%, #141a24 100%)",
        }
    return {
        "surface": "#ffffff",
        "subtle": "rgba(148,163,184,.12)",
        "border": "rgba(15,23,42,.09)",
        "muted": "rgba(71,85,105,.85)",
        "page": "linear-gradient(180deg, #f7f8fa 0%, #eef1f5 100%)",
    }


def apply_theme(
    *,
    brand=LINE_UP,           # primary accent
    secondary=LINE_DOWN,     # second accent, used in gradients
    radius="10px",
    card_shadow="0 12px 30px rgba(15,23,42,.12)",
    compact_tables=True,
):
    """Inject the dashboard CSS: cards for metrics, pill tabs, step headers and callouts."""
    is_dark = (st.get_option("theme.base") or "light") == "dark"
    p = _palette(is_dark)
    hide_index = (
        "[data-testid='stDataFrame'] .row_heading, [data-testid='stDataFrame'] .blank {display: none}"
        if compact_tables else ""
    )

    st.markdown(f"""
    <style>
      :root {{
        --brand: {brand};
        --secondary: {secondary};
        --radius: {radius};
        --card-shadow: {card_shadow};
      }}

      html, body, [class*="css"] {{
        font-family: system-ui, -apple-system, "Segoe UI", Roboto, "Helvetica Neue", Arial, sans-serif;
        background: {p["page"]};
      }}

      section.main > div.block-container {{
        padding: 2rem 2.4rem 3rem;
        max-width: 1320px;
      }}

      section[data-testid="stSidebar"] > div {{
        background: {p["surface"]};
        border-right: 1px solid {p["border"]};
      }}

      .stButton > button, .stDownloadButton button {{
        border-radius: var(--radius);
        border: 1px solid {p["border"]};
        background: {p["surface"]};
        font-weight: 600;
      }}
      .stButton > button[kind="primary"] {{
        background: linear-gradient(90deg, var(--brand), var(--secondary)) !important;
        color: white !important;
        border: none !important;
      }}

      div[data-testid="stMetric"] {{
        background: {p["surface"]};
        border: 1px solid {p["border"]};
        border-left: 4px solid var(--brand);
        border-radius: var(--radius);
        padding: 12px 14px;
        box-shadow: var(--card-shadow);
      }}
      div[data-testid="stMetric"] [data-testid="stMetricValue"] {{ font-weight: 700; font-variant-numeric: tabular-nums; }}

      div[role="tablist"] {{ gap: 6px; }}
      button[role="tab"] {{
        border-radius: 999px !important;
        padding: 4px 14px !important;
        border: 1px solid {p["border"]} !important;
      }}
      button[aria-selected="true"][role="tab"] {{
        color: white !important;
        background: var(--secondary) !important;
        border-color: transparent !important;
      }}

      [data-testid="stDataFrame"] tbody tr:hover td {{ background: {p["subtle"]} !important; }}
      {hide_index}

      .callout {{
        border-radius: var(--radius);
        border: 1px solid {p["border"]};
        background: {p["subtle"]};
        padding: 0.8rem 1rem;
        display: flex;
        gap: 0.75rem;
      }}
      .callout__body {{ opacity: .85; }}

      .step-header {{
        display: flex;
        align-items: center;
        gap: 0.9rem;
        padding: 1rem 1.2rem;
        border-radius: var(--radius);
        background: {p["surface"]};
        border: 1px solid {p["border"]};
        box-shadow: var(--card-shadow);
        margin-bottom: 1rem;
      }}
      .step-header__badge {{
        width: 32px;
        height: 32px;
        border-radius: 999px;
        display: grid;
        place-items: center;
        font-weight: 700;
        background: var(--brand);
        color: white;
      }}
      .step-header__title {{ font-weight: 600; }}
      .step-header__subtitle {{ color: {p["muted"]}; font-size: .92rem; }}
    </style>
    """, unsafe_allow_html=True)


def hero(title: str, subtitle: str | None = None, emoji: str = "🚇"):
    """Banner atop the dashboard, striped in the two direction colours."""
    st.markdown(f"""
    <div style="
      border-top: 4px solid {LINE_UP};
      border-bottom: 4px solid {LINE_DOWN};
      border-radius: var(--radius);
      padding: 14px 16px;
      box-shadow: var(--card-shadow);
      margin-bottom: 12px;
    ">
      <div style="font-size:20px;font-weight:700;margin-bottom:4px;">{emoji} {title}</div>
      {"<div style='opacity:.8'>" + subtitle + "</div>" if subtitle else ""}
    </div>
    """, unsafe_allow_html=True)
