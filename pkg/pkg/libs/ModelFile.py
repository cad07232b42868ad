# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import json
import os

import numpy as np

import pkg.libs.Variables as var

from pkg.libs.Booster import ParameterEnsemble
from pkg.libs.Booster import RUMBoostModel
from pkg.libs.Errors import ModelFileError
from pkg.libs.Errors import SpecError
from pkg.libs.Smoother import SmoothedModel
from pkg.libs.Smoother import Smoother
from pkg.libs.Spec import Spec
from pkg.libs.Tools import Tools
from pkg.libs.Tree import Tree
from pkg.libs.Tree import TreeNode


class ModelFile:
    """Versioned JSON model files.

    Trees are preorder node lists: ["S", column, bin, threshold, gain] for a
    split followed by its left then right subtree, ["L", value] for a leaf.
    Floats are written with their shortest round-trip repr, so a reload
    predicts bit-for-bit what the saved model did.
    """

    @classmethod
    def SaveModel(cls, model, path):
        """Writes a RUMBoostModel or a SmoothedModel."""
        Tools.Flag("Saving model to " + path)

        with open(path, "w") as modelFile:
            modelFile.write(cls.Dumps(model))

    @classmethod
    def Dumps(cls, model):
        return json.dumps(cls.ToDocument(model), indent=1, allow_nan=False) + "\n"

    @classmethod
    def ToDocument(cls, model):
        smoothed = isinstance(model, SmoothedModel)
        base = model.base if smoothed else model
        names = base.spec.alt_names

        doc = {
            "format": var.formatName,
            "version": var.formatVersion,
            "program": "{} {}".format(var.name, var.version),
            "seed": base.seed,
            "config_hash": base.config_hash,
            "spec": Spec.SerializeSpec(base.spec),
            "head": base.head.name,
            "trained_rounds": base.trained_rounds,
            "best_round": base.best_round,
            "ascs": {names[i]: float(v) for i, v in enumerate(base.ascs)},
            "asc_prime": {names[i]: float(v) for i, v in enumerate(base.asc_prime)},
            "domains": {column: list(bounds) for column, bounds in base.domains.items()},
            "history": base.history,
            "ensembles": [
                {
                    "kind": "fe_block" if ensemble.is_fe_block else "parameter",
                    "alt": names[ensemble.spec.alt],
                    "variables": list(ensemble.spec.variables),
                    "rounds": list(ensemble.rounds),
                    "trees": [cls.EncodeTree(tree) for tree in ensemble.trees],
                }
                for ensemble in base.ensembles
            ],
        }

        if smoothed:
            doc["smoothing"] = {
                "df": model.df,
                "bic": model.bic,
                "splines": [
                    {
                        "parameter": target,
                        "variable": curve.variable,
                        "knots": [float(t) for t in curve.knots],
                        "values": [float(y) for y in curve.values],
                    }
                    for target, curve in sorted(model.splines.items())
                ],
            }

        return doc

    @classmethod
    def EncodeTree(cls, tree):
        nodes = []

        for node in Tree.Nodes(tree):
            if node.is_leaf:
                nodes.append(["L", float(node.value)])
            else:
                nodes.append(
                    ["S", node.column, int(node.bin_threshold), float(node.threshold), float(node.gain)]
                )

        return nodes

    @classmethod
    def DecodeTree(cls, nodes):
        position = 0

        def Read():
            nonlocal position

            if position >= len(nodes):
                raise ModelFileError("A tree ends before all its nodes were read")

            node = nodes[position]
            position += 1

            if node[0] == "L" and len(node) == 2:
                return TreeNode(value=float(node[1]))

            if node[0] == "S" and len(node) == 5:
                split = TreeNode(
                    column=str(node[1]),
                    bin_threshold=int(node[2]),
                    threshold=float(node[3]),
                    gain=float(node[4]),
                )
                split.left = Read()
                split.right = Read()

                return split

            raise ModelFileError("Unknown tree node: {}".format(node))

        tree = Read()

        if position != len(nodes):
            raise ModelFileError("A tree has {} trailing nodes".format(len(nodes) - position))

        return tree

    @classmethod
    def LoadModel(cls, path):
        """Reads a model file; returns a SmoothedModel when it carries splines."""
        if not os.path.isfile(path):
            raise ModelFileError("The model file doesn't exist: {}".format(path))

        with open(path, "rb") as modelFile:
            raw = modelFile.read()

        return cls.Loads(raw)

    @classmethod
    def Loads(cls, raw):
        if isinstance(raw, str):
            raw = raw.encode("utf-8")

        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as error:
            raise ModelFileError("The model file isn't UTF-8", error.start) from error

        try:
            doc = json.loads(text)
        except json.JSONDecodeError as error:
            offset = len(text[: error.pos].encode("utf-8"))
            raise ModelFileError("Corrupt model file: {}".format(error.msg), offset) from error

        try:
            return cls.FromDocument(doc)
        except (KeyError, TypeError, ValueError, IndexError) as error:
            raise ModelFileError("Malformed model file: {!r}".format(error)) from error

    @classmethod
    def FromDocument(cls, doc):
        if not isinstance(doc, dict) or doc.get("format") != var.formatName:
            raise ModelFileError("Not a {} file".format(var.formatName))

        if doc.get("version") != var.formatVersion:
            raise ModelFileError(
                "Model file version {} isn't supported (expected {})".format(
                    doc.get("version"), var.formatVersion
                )
            )

        try:
            spec = Spec.ParseSpec(doc["spec"])
        except SpecError as error:
            raise ModelFileError("The stored specification is invalid: {}".format(error)) from error

        if len(doc["ensembles"]) != len(spec.ensembles):
            raise ModelFileError(
                "The file has {} ensembles but its specification {}".format(
                    len(doc["ensembles"]), len(spec.ensembles)
                )
            )

        ensembles = []

        for entry, stored in zip(spec.ensembles, doc["ensembles"]):
            if list(entry.variables) != stored["variables"]:
                raise ModelFileError(
                    "Ensemble over {} doesn't match the specification".format(stored["variables"])
                )

            ensembles.append(
                ParameterEnsemble(
                    spec=entry,
                    trees=[cls.DecodeTree(nodes) for nodes in stored["trees"]],
                    rounds=[int(r) for r in stored["rounds"]],
                )
            )

        names = spec.alt_names
        model = RUMBoostModel(
            spec=spec,
            ensembles=ensembles,
            ascs=np.array([float(doc["ascs"][name]) for name in names]),
            asc_prime=np.array([float(doc["asc_prime"][name]) for name in names]),
            trained_rounds=int(doc["trained_rounds"]),
            best_round=int(doc["best_round"]),
            history=list(doc["history"]),
            domains={column: tuple(bounds) for column, bounds in doc["domains"].items()},
            seed=doc["seed"],
            config_hash=doc["config_hash"],
        )

        if model.head.name != doc["head"]:
            raise ModelFileError("Stored head '{}' doesn't match the specification".format(doc["head"]))

        if "smoothing" not in doc:
            return model

        smoothing = doc["smoothing"]
        splines = {}

        for stored in smoothing["splines"]:
            splines[int(stored["parameter"])] = Smoother.MakeCurve(
                stored["variable"], stored["knots"], stored["values"]
            )

        return SmoothedModel(
            base=model, splines=splines, df=int(smoothing["df"]), bic=smoothing["bic"]
        )
