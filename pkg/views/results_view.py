import streamlit as st
from pathlib import Path
from models import ReconstructionError
from models.experiment import read_records, summarize

class ResultsView:
    """Summary and density-curve tables for a benchmark records CSV"""
    
    def render(self):
        """Render the results page"""
        st.title("📊 Benchmark Results")
        st.markdown("---")
        
        path = st.text_input("Records CSV", value="results/records.csv")
        if not path:
            return
        if not Path(path).exists():
            st.info(f"No records at {path}. Run `python cli.py benchmark --config ...` first.")
            return
        
        try:
            records = read_records(path)
            result = summarize(records)
        except ReconstructionError as e:
            st.error(f"❌ {e}")
            return
        
        col1, col2, col3 = st.columns(3)
        col1.metric("Records", len(records))
        col2.metric("Methods", records["method"].nunique())
        col3.metric("Failed", int(records["rmse"].isna().sum()))
        
        tab1, tab2, tab3 = st.tabs(["Summary", "Density curve", "Records"])
        
        with tab1:
            st.caption("mean_* weights every density equally; pooled_* averages all records")
            st.dataframe(result.summary, use_container_width=True)
        
        with tab2:
            method = st.selectbox("Method", sorted(result.curve["method"].unique()))
            st.dataframe(result.curve[result.curve["method"] == method], use_container_width=True)
        
        with tab3:
            st.dataframe(records, use_container_width=True)
