import hashlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app import __version__
from app.config import settings
from app.services.benchmark_ula import SectorAssignment, downlink_ula, optimize_uplink_ula
from app.services.channel3gpp import (
    PathSet,
    effective_channel_dcaa,
    effective_channel_ula,
    generate_user_channel,
    stream_for,
)
from app.services.costmodel import CostInputs, calculate_costs
from app.services.cylinder import CylinderArray, design_cylinder, subarray_count, subarray_outputs_many
from app.services.downlink import optimize_downlink
from app.services.errors import ConfigurationError
from app.services.pattern import pattern_grid
from app.services.simulation import exporters
from app.services.simulation.config import ExperimentConfig, phi_grid, snr_linear
from app.services.simulation.state import CONVERGENCE_COLUMNS, PATTERN_COLUMNS, ResultRow
from app.services.trial_tracker import TrialTiming, TrialTracker
from app.services.uplink import LinkReport, UplinkScenario, greedy_select


MANIFEST_NAME = "run-manifest.json"


def channel_checksum(paths: List[PathSet]) -> str:
    """SHA-256 de los content_hash de todos los usuarios del trial, en orden"""
    digest = hashlib.sha256()
    for path_set in paths:
        digest.update(path_set.content_hash().encode("ascii"))
    return digest.hexdigest()


def _pattern_rows(phis: np.ndarray, thetas: np.ndarray, magnitudes: np.ndarray) -> List[Tuple[float, float, float, float]]:
    # af_db relativo al máximo del grid, con piso de -300 dB
    peak = float(np.max(magnitudes))
    floor = peak * 1e-15 if peak > 0 else 1e-300
    decibels = 20 * np.log10(np.maximum(magnitudes, floor) / (peak if peak > 0 else 1.0))
    return [
        (float(p), float(t), float(m), float(d))
        for p, t, m, d in zip(phis, thetas, magnitudes, decibels)
    ]


class SimulationEngine:
    """
    Orquestador de experimentos.

    Cada operación escribe sus archivos en out_dir junto con run-manifest.json.
    """

    def __init__(self, config: ExperimentConfig, out_dir: Optional[Path] = None, max_workers: Optional[int] = None):
        """
        Args:
            config: Configuración del experimento
            out_dir: Directorio de salida (default: settings.results_dir/<hash>)
            max_workers: Tamaño del pool de trials (default: settings.max_workers)
        """
        self.config = config
        self.out_dir = Path(out_dir) if out_dir is not None else Path(settings.results_dir) / config.config_hash()[:12]
        self.max_workers = max_workers or settings.max_workers
        self.element_pattern = config.pattern.element_pattern()
        self._cylinder: Optional[CylinderArray] = None

    # ------------------------------------------------------------------
    # Construcción
    # ------------------------------------------------------------------

    def cylinder(self, M: Optional[int] = None) -> CylinderArray:
        """Cilindro del escenario (cacheado) o uno ad hoc para otro M"""
        if M is not None and M != self.config.M:
            return self._design(M)
        if self._cylinder is None:
            self._cylinder = self._design(self.config.M)
        return self._cylinder

    def _design(self, M: int) -> CylinderArray:
        options = self.config.pattern
        return design_cylinder(
            M,
            self.config.f_c,
            layer_spacing=options.layer_spacing,
            include_layer_phase=options.include_layer_phase,
            pattern=self.element_pattern,
        )

    def draw_trial_channels(self, trial: int) -> List[PathSet]:
        """K PathSets del trial, uno por stream (seed, trial, usuario)"""
        params = self.config.channel_params()
        return [
            generate_user_channel(stream_for(self.config.seed, trial, user), params)
            for user in range(self.config.K)
        ]

    def architecture_channels(
        self, architecture: str, paths: List[PathSet]
    ) -> Tuple[np.ndarray, Optional[SectorAssignment]]:
        """Canales efectivos de una arquitectura a partir de los mismos PathSets"""
        if architecture == "dcaa":
            cyl = self.cylinder()
            return np.array([effective_channel_dcaa(cyl, p) for p in paths]), None

        assignment = SectorAssignment.from_los([p.los_phi for p in paths])
        channels = np.array([
            effective_channel_ula(self.element_pattern, self.config.M, sector, p, self.config.pattern.ula_fixed_psi)
            for sector, p in zip(assignment.sectors, paths)
        ])
        return channels, assignment

    def run_link(
        self,
        architecture: str,
        direction: str,
        channels: np.ndarray,
        assignment: Optional[SectorAssignment],
        snr_db: float,
    ) -> LinkReport:
        """
        Un enlace a un SNR dado.

        Uplink: snr es la SNR de transmisión por usuario. Downlink: snr es la
        SNR promedio P_DL/(K sigma^2).
        """
        config = self.config
        options = config.algorithm
        snr = snr_linear(snr_db)

        if direction == "uplink":
            if architecture == "dcaa":
                scenario = UplinkScenario(channels=channels, transmit_snr=snr, M=config.M, sigma2=config.sigma2)
                return greedy_select(scenario, config.n_rf)
            return optimize_uplink_ula(channels, assignment, snr * config.sigma2, config.sigma2, config.n_rf)

        total_power = snr * config.K * config.sigma2
        if architecture == "dcaa":
            return optimize_downlink(
                channels,
                total_power,
                config.n_rf,
                options.t_max,
                options.eps_th,
                M=config.M,
                sigma2=config.sigma2,
                update_selection=options.update_selection,
                active_set=options.active_set,
            )
        return downlink_ula(
            channels,
            assignment,
            total_power,
            n_rf=config.n_rf,
            t_max=options.t_max,
            eps_th=options.eps_th,
            sigma2=config.sigma2,
            active_set=options.active_set,
        )

    # ------------------------------------------------------------------
    # Operaciones
    # ------------------------------------------------------------------

    def run_trial(self, trial: int) -> List[ResultRow]:
        """Todas las filas (arquitectura x dirección x SNR) de un trial"""
        paths = self.draw_trial_channels(trial)
        rows = []
        for architecture in self.config.architectures:
            channels, assignment = self.architecture_channels(architecture, paths)
            checksum = channel_checksum(paths)
            for direction in self.config.directions:
                for snr_db in self.config.snr_grid_db:
                    report = self.run_link(architecture, direction, channels, assignment, snr_db)
                    rows.append(ResultRow(
                        trial=trial,
                        architecture=architecture,
                        direction=direction,
                        snr_db=float(snr_db),
                        sum_rate_bps_hz=report.sum_rate,
                        per_user_sinr=[float(v) for v in report.per_user_sinr],
                        iterations=report.iterations,
                        converged=report.converged,
                        channel_checksum=checksum,
                    ))
        return rows

    def sweep(self) -> Dict[str, Any]:
        """
        Sum rate vs SNR para todas las arquitecturas y direcciones.

        Los trials corren en un ThreadPoolExecutor; un trial que falla se
        registra y se salta. Las filas se ordenan por (trial, arquitectura,
        dirección, snr) antes de escribir.
        """
        config = self.config
        timings: List[TrialTiming] = []
        failed: List[int] = []

        def guarded(trial: int) -> List[ResultRow]:
            try:
                with TrialTracker("sweep", trial, timings, {"scenario": config.scenario}) as tracker:
                    rows = self.run_trial(trial)
                    tracker.record(rows=len(rows))
            except Exception:
                failed.append(trial)
                return []
            return rows

        print(f"🚀 [SWEEP] {config.n_trials} trials, escenario={config.scenario}, M={config.M}, K={config.K}, workers={self.max_workers}")
        # Diseñar el cilindro antes del pool para no repetirlo por thread
        if "dcaa" in config.architectures:
            self.cylinder()

        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            batches = list(pool.map(guarded, range(config.n_trials)))
        rows = [row for batch in batches for row in batch]

        files = [
            exporters.write_results(self.out_dir / "results.csv", rows),
            exporters.write_timings(self.out_dir / "timings.csv", timings),
        ]
        if config.dump_channels:
            files.append(self._dump_channels())

        if failed:
            print(f"⚠️ [SWEEP] Trials fallidos: {sorted(failed)}")
        print(f"✅ [SWEEP] {len(rows)} filas en {files[0]}")
        return self._write_manifest("sweep", files, {"rows": len(rows), "failed_trials": sorted(failed)})

    def _dump_channels(self) -> Path:
        dump = {}
        for trial in range(self.config.n_trials):
            dump[str(trial)] = [
                {
                    "user": user,
                    "los_phi_rad": p.los_phi,
                    "los_theta_rad": p.los_theta,
                    "content_hash": p.content_hash(),
                    "rays": p.to_records(),
                }
                for user, p in enumerate(self.draw_trial_channels(trial))
            ]
        return exporters.write_json(self.out_dir / "channels.json", dump)

    def converge(self) -> Dict[str, Any]:
        """
        Traza por iteración (sum rate y |dp|_1) del downlink de cada arquitectura.

        Se escribe una fila por iteración t = 1..T.
        """
        config = self.config
        if config.direction == "uplink":
            raise ConfigurationError("La traza de convergencia requiere direction=downlink o both")

        trial = config.algorithm.converge_trial
        snr_db = config.algorithm.converge_snr_db
        paths = self.draw_trial_channels(trial)
        print(f"🚀 [CONVERGE] trial={trial} snr={snr_db} dB eps_th={config.algorithm.eps_th}")

        files, summary = [], {}
        for architecture in config.architectures:
            channels, assignment = self.architecture_channels(architecture, paths)
            report = self.run_link(architecture, "downlink", channels, assignment, snr_db)
            rows = [
                (t, float(report.trace[t]), float(report.p_change_trace[t - 1]))
                for t in range(1, report.iterations + 1)
            ]
            files.append(exporters.write_csv(self.out_dir / f"convergence_{architecture}.csv", CONVERGENCE_COLUMNS, rows))
            summary[architecture] = {
                "iterations": report.iterations,
                "converged": report.converged,
                "sum_rate_bps_hz": report.sum_rate,
            }
            print(f"📊 [CONVERGE] {architecture}: {report.iterations} iteraciones, convergió={report.converged}")

        return self._write_manifest("converge", files, summary)

    def pattern(self) -> Dict[str, Any]:
        """Patrones por sub-array, envolvente del cilindro y roster JSON"""
        options = self.config.pattern
        cyl = self.cylinder(options.M)
        phis = phi_grid(options.phi_step_deg)
        if any(not 0.0 <= theta <= 180.0 for theta in options.theta_deg):
            raise ConfigurationError(f"theta_deg fuera de [0, 180]: {options.theta_deg}")
        thetas = np.radians(options.theta_deg)

        files = []
        for index in options.subarrays:
            if not 0 <= index < cyl.n_sub:
                raise ConfigurationError(f"Sub-array {index} fuera de [0, {cyl.n_sub})")
            samples = pattern_grid(cyl.subarrays[index], phis, thetas, cyl.pattern, cyl.include_layer_phase)
            rows = _pattern_rows(
                np.array([s.phi for s in samples]),
                np.array([s.theta for s in samples]),
                np.abs(np.array([s.value for s in samples])),
            )
            files.append(exporters.write_csv(self.out_dir / f"pattern_sub{index}.csv", PATTERN_COLUMNS, rows))

        theta_mesh, phi_mesh = np.meshgrid(thetas, phis, indexing="ij")
        envelope = np.abs(subarray_outputs_many(cyl, phi_mesh.ravel(), theta_mesh.ravel())).max(axis=1)
        files.append(exporters.write_csv(
            self.out_dir / "pattern_cylinder.csv",
            PATTERN_COLUMNS,
            _pattern_rows(phi_mesh.ravel(), theta_mesh.ravel(), envelope),
        ))
        files.append(exporters.write_json(self.out_dir / "roster.json", {
            "M": cyl.config.M,
            "N": cyl.N,
            "f_c_hz": cyl.config.f_c,
            "layer_spacing_m": cyl.layer_spacing,
            "total_height_m": cyl.total_height,
            "subarrays": cyl.roster(),
        }))

        print(f"✅ [PATTERN] {len(files)} archivos para M={cyl.config.M} (N={cyl.N})")
        return self._write_manifest("pattern", files, {"M": cyl.config.M, "N": cyl.N})

    def cost(self) -> Dict[str, Any]:
        """Reporte de costos de hardware para las dimensiones del escenario"""
        config = self.config
        N = subarray_count(config.M)
        if config.prices is not None:
            inputs = CostInputs(M=config.M, N=N, n_rf=config.n_rf, **config.prices.model_dump())
        else:
            inputs = CostInputs.from_quotation(M=config.M, N=N, n_rf=config.n_rf, band=config.price_band)

        report = calculate_costs(inputs)
        path = exporters.write_json(self.out_dir / "cost_report.json", report)
        print(f"📊 [COST] cylinder={report['cost_cylinder']:.2f} ula={report['cost_ula']:.2f} ratio={report['ratio']:.4f}")
        manifest = self._write_manifest("cost", [path], {"N": N})
        manifest["report"] = report
        return manifest

    # ------------------------------------------------------------------

    def _write_manifest(self, operation: str, files: List[Path], summary: Dict[str, Any]) -> Dict[str, Any]:
        manifest = {
            "operation": operation,
            "config_hash": self.config.config_hash(),
            "seed": self.config.seed,
            "version": __version__,
            "out_dir": str(self.out_dir),
            "files": [Path(f).name for f in files],
            "summary": summary,
        }
        exporters.write_manifest(self.out_dir / MANIFEST_NAME, manifest)
        return manifest


def run_pattern_export(config: ExperimentConfig, out_dir: Optional[Path] = None) -> Dict[str, Any]:
    return SimulationEngine(config, out_dir).pattern()


def run_sum_rate_sweep(
    config: ExperimentConfig, out_dir: Optional[Path] = None, max_workers: Optional[int] = None
) -> Dict[str, Any]:
    return SimulationEngine(config, out_dir, max_workers).sweep()


def run_convergence_trace(config: ExperimentConfig, out_dir: Optional[Path] = None) -> Dict[str, Any]:
    return SimulationEngine(config, out_dir).converge()


def run_cost_report(config: ExperimentConfig, out_dir: Optional[Path] = None) -> Dict[str, Any]:
    return SimulationEngine(config, out_dir).cost()
