import streamlit as st
import numpy as np
import pandas as pd
from models import ReconstructionError, compute_metrics
from models.methods import METHODS, run_method
from utils.data_generator import SyntheticConfig, generate_synthetic, random_sampling_mask

class ReconstructionView:
    """Reconstruct a small synthetic dataset with one method"""
    
    def render(self):
        """Render the reconstruction page"""
        st.title("🛰️ Single Reconstruction")
        st.markdown("---")
        
        with st.form("reconstruction_form"):
            col1, col2 = st.columns(2)
            
            with col1:
                n_nodes = st.number_input("Nodes", min_value=10, max_value=300, value=50, step=10)
                n_times = st.number_input("Time steps", min_value=5, max_value=300, value=40, step=5)
                knn_k = st.number_input("k nearest neighbors", min_value=1, max_value=10, value=5)
                seed = st.number_input("Seed", min_value=0, value=0, step=1)
            
            with col2:
                method = st.selectbox("Method", list(METHODS), index=list(METHODS).index("graphtrss"))
                density = st.slider("Sampling density", min_value=0.05, max_value=1.0, value=0.3, step=0.05)
                upsilon = st.number_input("υ (tgsr / graphtrss)", min_value=0.001, value=0.5, format="%.3f")
                epochs = st.number_input("Epochs (timegnn / gcn)", min_value=1, max_value=5000, value=300, step=50)
            
            submitted = st.form_submit_button("Reconstruct", type="primary")
        
        if submitted:
            self._run(int(n_nodes), int(n_times), int(knn_k), int(seed), method, float(density),
                      float(upsilon), int(epochs))
    
    def _params(self, method, upsilon, epochs):
        if method in ("tgsr", "graphtrss"):
            return {"upsilon": upsilon}
        if method in ("timegnn", "gcn"):
            return {"epochs": epochs}
        return {}
    
    def _run(self, n_nodes, n_times, knn_k, seed, method, density, upsilon, epochs):
        try:
            with st.spinner("Reconstructing..."):
                dataset = generate_synthetic(SyntheticConfig(n_nodes=n_nodes, n_times=n_times, knn_k=knn_k,
                                                             low_freq_count=min(10, n_nodes - 1), seed=seed))
                mask = random_sampling_mask(n_nodes, n_times, density, seed)
                truth = dataset.signal.values
                outcome = run_method(method, dataset, truth, mask, self._params(method, upsilon, epochs), seed)
        except ReconstructionError as e:
            st.error(f"❌ {e}")
            return
        
        if not outcome.converged:
            st.warning("⚠️ Solver stopped before reaching its tolerance")
        
        unsampled = mask.complement()
        if unsampled.any():
            metrics = compute_metrics(outcome.reconstruction, truth, unsampled)
            col1, col2, col3 = st.columns(3)
            col1.metric("RMSE", f"{metrics.rmse:.4f}")
            col2.metric("MAE", f"{metrics.mae:.4f}")
            col3.metric("MAPE", "n/a" if metrics.mape is None else f"{metrics.mape:.4f}")
            if metrics.mape_skipped:
                st.caption(f"{metrics.mape_skipped} near-zero entries left out of MAPE")
        else:
            st.info("Every entry was observed; nothing to evaluate")
        
        st.caption(f"{dataset} · mask {mask.mask_hash} · {int(mask.mask.sum())} observed entries")
        
        st.subheader("📋 First rows")
        rows = min(10, n_nodes)
        columns = [f"t{j}" for j in range(n_times)]
        st.markdown("**Reconstruction**")
        st.dataframe(pd.DataFrame(outcome.reconstruction.values[:rows], columns=columns), use_container_width=True)
        st.markdown("**Ground truth**")
        st.dataframe(pd.DataFrame(truth[:rows], columns=columns), use_container_width=True)
        st.markdown("**Observed (blank = not sampled)**")
        observed = np.where(mask.mask[:rows], truth[:rows], np.nan)
        st.dataframe(pd.DataFrame(observed, columns=columns), use_container_width=True)
