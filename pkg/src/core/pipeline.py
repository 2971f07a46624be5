"""Verification pipeline orchestration"""

import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

from .config import RunConfig
from ..heegner.cmfields import ImagQuadField
from ..heegner.eulerlab import (CMPointSpec, DistributionInstance, TpFiber, eval_point, fiber_targets,
                                verify_distribution)
from ..heegner.galoisact import GaloisElement, WMatrix, orbit_stability_check, point_under_matrix, w_group
from ..heegner.points import EvaluatedPoint
from ..utils.cache import PointCache


class VerificationPipeline:
    """Runs module operations with the configured precision, cache and worker pool"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.cache = PointCache(config.cache_dir)
        self.logger = logging.getLogger(__name__)

    def eval_point_cached(self, spec: CMPointSpec, prec_bits: Optional[int] = None) -> EvaluatedPoint:
        """eval_point through the point cache; cached entries carry no residual"""
        bits = prec_bits or self.config.prec_bits
        key = spec.cache_key(bits)
        if self.config.cache_results:
            cached = self.cache.load(key)
            if cached is not None:
                cached.spec = spec
                return cached
        point = eval_point(spec, bits, max_level=self.config.max_raw_form_level)
        if self.config.cache_results:
            self.cache.store(key, point)
        return point

    async def tp_fiber_async(self, instance: DistributionInstance, prec_bits: Optional[int] = None) -> TpFiber:
        """Fiber points evaluated on the worker pool, assembled in fiber order"""
        bits = prec_bits or self.config.prec_bits
        N = instance.spec.N
        targets = fiber_targets(instance)
        with ThreadPoolExecutor(max_workers=self.config.max_workers) as executor:
            loop = asyncio.get_event_loop()
            tasks = [
                loop.run_in_executor(executor, eval_point, tau, bits, N, index, self.config.max_raw_form_level)
                for tau, index, _ in targets
            ]
            points = await asyncio.gather(*tasks)
        for point, (_, _, desc) in zip(points, targets):
            point.tau_desc = desc
        if len(points) == instance.fiber_size:
            return TpFiber(instance, list(points))
        return TpFiber(instance, list(points[:-1]), points[-1])

    async def galois_orbit_async(self, field: ImagQuadField, N: int,
                                 prec_bits: Optional[int] = None) -> List[Tuple[WMatrix, EvaluatedPoint]]:
        bits = prec_bits or self.config.prec_bits
        group = w_group(N, field)
        with ThreadPoolExecutor(max_workers=self.config.max_workers) as executor:
            loop = asyncio.get_event_loop()
            tasks = [loop.run_in_executor(executor, point_under_matrix, GaloisElement(m), N, bits) for m in group]
            points = await asyncio.gather(*tasks)
        return list(zip(group, points))

    async def orbit_report_async(self, field: ImagQuadField, N: int,
                                 prec_bits: Optional[int] = None) -> Dict[str, Any]:
        bits = prec_bits or self.config.prec_bits
        orbit = await self.galois_orbit_async(field, N, bits)
        report = orbit_stability_check(field, N, bits, orbit)
        report["orbit"] = [{"element": m.to_dict(), "point": pt.to_dict()} for m, pt in orbit]
        return report

    def verify_distribution(self, instance: DistributionInstance, **kwargs) -> Dict[str, Any]:
        """verify_distribution with precision, tolerance and recognition budgets from the config"""
        options = {
            "B": self.config.prec_bits,
            "tol_log2": self.config.tol_log2,
            "height_bound": 2 ** self.config.divisor_height_bits,
            "escalation": self.config.escalation_schedule(),
            "max_level": self.config.max_raw_form_level,
        }
        options.update(kwargs)
        return verify_distribution(instance, **options)

    async def verify_distribution_async(self, instance: DistributionInstance, **kwargs) -> Dict[str, Any]:
        loop = asyncio.get_event_loop()
        return await loop.run_in_executor(None, lambda: self.verify_distribution(instance, **kwargs))
