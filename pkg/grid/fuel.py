from dataclasses import dataclass


@dataclass(frozen=True)
class FuelLinearization:
    """Curva di combustibile lineare: f_min * u + f_avg * P (MBtu)"""
    f_min: float  # MBtu per ora di commitment
    f_avg: float  # MBtu/MWh

    def fuel(self, p: float) -> float:
        return self.f_min + self.f_avg * p


def quadratic_fuel(unit, p: float) -> float:
    """fuel(P) = a + b*P + c*P^2"""
    return unit.fuel_a + unit.fuel_b * p + unit.fuel_c * p * p


def linearize_fuel(unit) -> FuelLinearization:
    """
    Corda della curva quadratica tra p_min e p_max.

    La retta coincide con la quadratica agli estremi e, per c >= 0, non la
    sottostima mai sull'intervallo.
    """
    if unit.p_max > unit.p_min:
        f_avg = (quadratic_fuel(unit, unit.p_max) - quadratic_fuel(unit, unit.p_min)) / (
            unit.p_max - unit.p_min
        )
    else:
        f_avg = unit.fuel_b + 2.0 * unit.fuel_c * unit.p_min
    f_min = quadratic_fuel(unit, unit.p_min) - f_avg * unit.p_min
    return FuelLinearization(f_min=f_min, f_avg=f_avg)
