# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

from dataclasses import dataclass

import numpy as np

import pkg.libs.Variables as var

from pkg.libs.Errors import SpecError
from pkg.libs.Tools import Tools


@dataclass(frozen=True)
class ParameterSpec:
    """One utility parameter: an ensemble over one variable or an interacting pair."""

    alt: int
    variables: tuple
    monotone: tuple
    max_depth: int = 1


@dataclass(frozen=True)
class FEBlockSpec:
    """Unrestricted ensemble over socio-economic variables (individual constants)."""

    alt: int
    variables: tuple
    max_depth: int = 6
    num_leaves: int = 31

    @property
    def monotone(self):
        return (var.unconstrained,) * len(self.variables)


@dataclass(frozen=True)
class NestSpec:
    nests: tuple
    mu: tuple


@dataclass(frozen=True)
class ModelSpec:
    alt_names: tuple
    parameters: tuple
    fe_blocks: tuple = ()
    nest: NestSpec = None
    reference_alt: int = 0
    socio_economic: tuple = ()
    allow_shared_fe: bool = False

    @property
    def J(self):
        return len(self.alt_names)

    @property
    def ensembles(self):
        """Parameters followed by FE blocks, the order ensembles are stored in."""
        return self.parameters + self.fe_blocks

    def Columns(self):
        """Every column the specification references, in first-use order."""
        seen = {}

        for entry in self.ensembles:
            for variable in entry.variables:
                seen.setdefault(variable, None)

        return list(seen)

    def FindParameter(self, alt, variables):
        """Index of the parameter of alt over exactly these variables."""
        alt = self.AltIndex(alt)
        variables = tuple(variables)

        for index, parameter in enumerate(self.parameters):
            if parameter.alt == alt and parameter.variables == variables:
                return index

        raise SpecError(
            "No parameter over {} for alternative {}".format(
                ", ".join(variables), self.alt_names[alt]
            )
        )

    def AltIndex(self, alt):
        if isinstance(alt, (int, np.integer)) and not isinstance(alt, bool):
            if 0 <= alt < self.J:
                return int(alt)
        elif alt in self.alt_names:
            return self.alt_names.index(alt)

        raise SpecError("Unknown alternative: {}".format(alt))


class Spec:
    """Parses, validates and serializes utility specifications."""

    _top_keys = {
        "alternatives",
        "reference_alt",
        "socio_economic",
        "parameters",
        "fe_blocks",
        "nest",
        "allow_shared_fe",
    }
    _parameter_keys = {"alt", "variables", "monotone", "max_depth"}
    _fe_keys = {"alt", "variables", "max_depth", "num_leaves"}
    _nest_keys = {"alternatives", "mu"}

    @classmethod
    def LoadSpec(cls, path):
        return cls.ParseSpec(Tools.LoadJson(path, SpecError))

    @classmethod
    def ParseSpec(cls, doc):
        if not isinstance(doc, dict):
            raise SpecError("The specification must be a JSON object")

        cls._CheckKeys(doc, cls._top_keys, "")

        if "alternatives" not in doc:
            raise SpecError("Missing key 'alternatives'")

        altNames = doc["alternatives"]

        if isinstance(altNames, int):
            altNames = [str(alt) for alt in range(altNames)]

        if not isinstance(altNames, list) or len(altNames) < 2:
            raise SpecError("At least two alternatives are needed", "alternatives")

        altNames = tuple(str(name) for name in altNames)

        if len(set(altNames)) != len(altNames):
            raise SpecError("Alternative names must be unique", "alternatives")

        parameters = []
        seen = set()

        for index, entry in enumerate(doc.get("parameters", [])):
            location = "parameters[{}]".format(index)
            parameter = cls._ParseParameter(entry, altNames, location)
            key = (parameter.alt, frozenset(parameter.variables))

            if key in seen:
                raise SpecError(
                    "Duplicate parameter for the same alternative and variables", location
                )

            seen.add(key)
            parameters.append(parameter)

        if not parameters:
            raise SpecError("no parameters", "parameters")

        feBlocks = tuple(
            cls._ParseFEBlock(entry, altNames, "fe_blocks[{}]".format(index))
            for index, entry in enumerate(doc.get("fe_blocks", []))
        )

        nest = None

        if doc.get("nest") is not None:
            nest = cls._ParseNest(doc["nest"], altNames, "nest")

        socio = doc.get("socio_economic", [])

        if not isinstance(socio, list) or not all(isinstance(name, str) for name in socio):
            raise SpecError("Expected a list of column names", "socio_economic")

        allowShared = doc.get("allow_shared_fe", False)

        if not isinstance(allowShared, bool):
            raise SpecError("Expected true or false", "allow_shared_fe")

        return ModelSpec(
            alt_names=altNames,
            parameters=tuple(parameters),
            fe_blocks=feBlocks,
            nest=nest,
            reference_alt=cls._Alt(doc.get("reference_alt", 0), altNames, "reference_alt"),
            socio_economic=tuple(socio),
            allow_shared_fe=allowShared,
        )

    @classmethod
    def _CheckKeys(cls, entry, allowed, location):
        if not isinstance(entry, dict):
            raise SpecError("Expected an object", location or None)

        for key in entry:
            if key not in allowed:
                where = "{}.{}".format(location, key) if location else key
                raise SpecError("Unknown key '{}'".format(key), where)

    @classmethod
    def _Alt(cls, value, altNames, location):
        if isinstance(value, bool):
            raise SpecError("Unknown alternative: {}".format(value), location)

        if isinstance(value, int):
            if 0 <= value < len(altNames):
                return value
        elif value in altNames:
            return altNames.index(value)

        raise SpecError("Unknown alternative: {}".format(value), location)

    @classmethod
    def _Variables(cls, entry, location):
        variables = entry.get("variables")

        if isinstance(variables, str):
            variables = [variables]

        if not isinstance(variables, list) or not variables:
            raise SpecError("Expected a non-empty list of variables", location + ".variables")

        if len(set(variables)) != len(variables):
            raise SpecError("A variable is listed twice", location + ".variables")

        return tuple(str(name) for name in variables)

    @classmethod
    def _PositiveInt(cls, value, location, minimum=1):
        if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
            raise SpecError("Expected an integer >= {}".format(minimum), location)

        return value

    @classmethod
    def _ParseParameter(cls, entry, altNames, location):
        cls._CheckKeys(entry, cls._parameter_keys, location)

        if "alt" not in entry:
            raise SpecError("Missing key 'alt'", location)

        alt = cls._Alt(entry["alt"], altNames, location + ".alt")
        variables = cls._Variables(entry, location)

        if len(variables) > 2:
            raise SpecError(
                "Interactions are limited to two variables", location + ".variables"
            )

        monotone = entry.get("monotone", var.unconstrained)

        if isinstance(monotone, str):
            monotone = [monotone] * len(variables)

        if not isinstance(monotone, list) or len(monotone) != len(variables):
            raise SpecError(
                "Expected one monotone direction per variable", location + ".monotone"
            )

        for direction in monotone:
            if direction not in var.directions:
                raise SpecError(
                    "Unknown monotone direction '{}'".format(direction),
                    location + ".monotone",
                )

        maxDepth = cls._PositiveInt(
            entry.get("max_depth", len(variables)), location + ".max_depth"
        )

        if len(variables) == 1 and maxDepth != 1:
            raise SpecError(
                "Single-variable parameters use max_depth 1", location + ".max_depth"
            )

        return ParameterSpec(
            alt=alt, variables=variables, monotone=tuple(monotone), max_depth=maxDepth
        )

    @classmethod
    def _ParseFEBlock(cls, entry, altNames, location):
        cls._CheckKeys(entry, cls._fe_keys, location)

        if "alt" not in entry:
            raise SpecError("Missing key 'alt'", location)

        return FEBlockSpec(
            alt=cls._Alt(entry["alt"], altNames, location + ".alt"),
            variables=cls._Variables(entry, location),
            max_depth=cls._PositiveInt(entry.get("max_depth", 6), location + ".max_depth"),
            num_leaves=cls._PositiveInt(
                entry.get("num_leaves", 31), location + ".num_leaves", minimum=2
            ),
        )

    @classmethod
    def _ParseNest(cls, entry, altNames, location):
        """Parses a nest section; alternatives left out become singleton nests with mu 1."""
        if not isinstance(entry, dict) or set(entry) != {"nests"}:
            raise SpecError("Expected an object with a single 'nests' list", location)

        if not isinstance(entry["nests"], list):
            raise SpecError("Expected a list", location + ".nests")

        nests = []
        assigned = set()

        for index, nest in enumerate(entry["nests"]):
            where = "{}.nests[{}]".format(location, index)
            cls._CheckKeys(nest, cls._nest_keys, where)
            members = nest.get("alternatives")

            if not isinstance(members, list) or not members:
                raise SpecError("Expected a non-empty list of alternatives", where)

            members = tuple(
                sorted(cls._Alt(alt, altNames, where + ".alternatives") for alt in members)
            )

            if assigned.intersection(members):
                raise SpecError("An alternative appears in two nests", where)

            assigned.update(members)
            mu = nest.get("mu", 1.0)

            if isinstance(mu, bool) or not isinstance(mu, (int, float)) or not mu >= 1:
                raise SpecError("mu must be a real number >= 1, got {}".format(mu), where + ".mu")

            nests.append((members, float(mu)))

        for alt in range(len(altNames)):
            if alt not in assigned:
                nests.append(((alt,), 1.0))

        nests.sort(key=lambda nest: nest[0][0])

        return NestSpec(
            nests=tuple(members for members, _ in nests),
            mu=tuple(mu for _, mu in nests),
        )

    @classmethod
    def ParseNestFlag(cls, vText, mu, altNames):
        """Builds a NestSpec from 'a;b;c,d' with mu applied to every multi-member nest."""
        nests = []

        for group in vText.split(";"):
            members = [name.strip() for name in group.split(",") if name.strip()]

            if members:
                nests.append(
                    {"alternatives": members, "mu": mu if len(members) > 1 else 1.0}
                )

        return cls._ParseNest({"nests": nests}, tuple(altNames), "--nested")

    @classmethod
    def WithNest(cls, spec, nest):
        return ModelSpec(
            alt_names=spec.alt_names,
            parameters=spec.parameters,
            fe_blocks=spec.fe_blocks,
            nest=nest,
            reference_alt=spec.reference_alt,
            socio_economic=spec.socio_economic,
            allow_shared_fe=spec.allow_shared_fe,
        )

    @classmethod
    def SerializeSpec(cls, spec):
        """Canonical document: ParseSpec(SerializeSpec(spec)) == spec."""
        names = spec.alt_names
        doc = {
            "alternatives": list(names),
            "reference_alt": names[spec.reference_alt],
            "socio_economic": list(spec.socio_economic),
            "parameters": [
                {
                    "alt": names[parameter.alt],
                    "variables": list(parameter.variables),
                    "monotone": list(parameter.monotone),
                    "max_depth": parameter.max_depth,
                }
                for parameter in spec.parameters
            ],
            "fe_blocks": [
                {
                    "alt": names[block.alt],
                    "variables": list(block.variables),
                    "max_depth": block.max_depth,
                    "num_leaves": block.num_leaves,
                }
                for block in spec.fe_blocks
            ],
            "allow_shared_fe": spec.allow_shared_fe,
        }

        if spec.nest is not None:
            doc["nest"] = {
                "nests": [
                    {"alternatives": [names[alt] for alt in members], "mu": mu}
                    for members, mu in zip(spec.nest.nests, spec.nest.mu)
                ]
            }

        return doc

    @classmethod
    def ValidateSpec(cls, spec, ds):
        """Checks the specification against a dataset and returns it unchanged."""
        if spec.J != ds.n_alternatives:
            raise SpecError(
                "The specification has {} alternatives but the data has {}".format(
                    spec.J, ds.n_alternatives
                ),
                "alternatives",
            )

        columns = set(ds.columns)
        socio = set(spec.socio_economic)
        owner = {}

        for name in spec.socio_economic:
            if name not in columns:
                raise SpecError("Column '{}' is not in the dataset".format(name), "socio_economic")

        for index, parameter in enumerate(spec.parameters):
            location = "parameters[{}]".format(index)

            for variable, direction in zip(parameter.variables, parameter.monotone):
                if variable not in columns:
                    raise SpecError(
                        "Column '{}' is not in the dataset".format(variable), location
                    )

                if variable not in socio:
                    previous = owner.setdefault(variable, parameter.alt)

                    if previous != parameter.alt:
                        raise SpecError(
                            "Alternative-specific attribute '{}' is used by both {} and {}".format(
                                variable,
                                spec.alt_names[previous],
                                spec.alt_names[parameter.alt],
                            ),
                            location,
                        )

                if direction != var.unconstrained and cls._IsDummy(ds.Column(variable)):
                    Tools.Warn(
                        "Monotone direction on the dummy column '{}' ({})".format(
                            variable, location
                        )
                    )

        for index, block in enumerate(spec.fe_blocks):
            location = "fe_blocks[{}]".format(index)

            for variable in block.variables:
                if variable not in columns:
                    raise SpecError(
                        "Column '{}' is not in the dataset".format(variable), location
                    )

                if variable not in socio:
                    raise SpecError(
                        "FE blocks only take socio-economic variables, '{}' isn't one".format(
                            variable
                        ),
                        location,
                    )

            if not spec.allow_shared_fe:
                for parameter in spec.parameters:
                    shared = set(parameter.variables) & set(block.variables)

                    if parameter.alt == block.alt and shared:
                        raise SpecError(
                            "'{}' is in both an FE block and a parameter of {}; "
                            "set allow_shared_fe to keep both".format(
                                sorted(shared)[0], spec.alt_names[block.alt]
                            ),
                            location,
                        )

        return spec

    @classmethod
    def _IsDummy(cls, values):
        return len(values) > 0 and np.isin(values, (0.0, 1.0)).all()
