R = 0.0821


def ft_water_to_atm(feet):
    return feet * 0.0294


def ideal_volume(n, temperature, pressure):
    return n * R * temperature / pressure


class Gas:
    def __init__(self, name, molar_mass):
        self.name = name
        self.molar_mass = molar_mass

    def moles(self, grams):
        return grams / self.molar_mass

    def volume(self, grams, temperature, pressure):
        return ideal_volume(self.moles(grams), temperature, pressure)
