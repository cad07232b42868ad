# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import os
import sys
import json
import hashlib
import argparse

import pandas as pd

import pkg.libs.Variables as var

from pkg.libs.Errors import ConfigError


class Tools:
    """Contains various tools/utilities that are used throughout the app."""

    commands = ("train", "evaluate", "smooth", "indicators", "bootstrap")

    # Checks parameters
    @classmethod
    def ProcessArguments(cls, argv=None):
        parser = argparse.ArgumentParser(
            description="Trains, smooths and interprets gradient boosted random utility models."
        )
        parser.add_argument("command", choices=cls.commands, help="Workflow to run.")
        parser.add_argument(
            "-c",
            "--config",
            help="Path to the settings.json. (i.e: ./settings.json)",
        )
        parser.add_argument("--data", help="Delimited choice data file.")
        parser.add_argument("--schema", help="JSON schema naming the data columns.")
        parser.add_argument("--spec", help="JSON utility specification.")
        parser.add_argument("--model", help="Model file to read.")
        parser.add_argument("--valid", help="Validation data file for early stopping.")
        parser.add_argument("--out", default=".", help="Output directory.")
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--rounds", type=int, help="Boosting round cap.")
        parser.add_argument("--lr", type=float, help="Learning rate.")
        parser.add_argument(
            "--early-stop", type=int, help="Early stopping rounds (0 disables)."
        )
        parser.add_argument("--cv", type=int, help="Number of grouped folds.")
        parser.add_argument("--group", help="Column used to group rows into folds.")
        parser.add_argument(
            "--nested", help='Nest partition by alternative name, i.e: "walk;cycle;pt,drive"'
        )
        parser.add_argument("--mu", type=float, help="Scale of every non-singleton nest.")
        parser.add_argument("--mu-grid", help="Search grid for mu as LO:HI:STEP.")
        parser.add_argument(
            "--smooth-targets",
            help='Parameters to smooth as ALT:VARIABLE pairs, i.e: "drive:cost_driving,drive:dur_driving"',
        )
        parser.add_argument("--knot-bounds", help="Knot count bounds as LO:HI.")
        parser.add_argument("--searches", type=int, help="Knot count searches.")
        parser.add_argument("--vot", help="Value of time as ALT:TIME:COST.")
        parser.add_argument("--bootstrap", type=int, help="Bootstrap iterations.")
        parser.add_argument(
            "-q", "--quiet", action="store_true", help="Only print warnings and errors."
        )
        parser.add_argument(
            "-v",
            "--version",
            action="version",
            version="%(prog)s {}".format(var.version),
            help="Displays the version of this application.",
        )

        args = parser.parse_args(argv)

        if args.config:
            var.settingsPath = args.config

        if args.quiet:
            var.quiet = True

        return args

    @classmethod
    def PrintHeader(cls):
        """Prints the header of the application."""
        if var.quiet:
            return

        print("-" * 30)
        Tools.Print(
            Tools.Colorize("yellow", var.name)
            + " - "
            + Tools.Colorize("pink", "v" + var.version)
        )
        Tools.Print(var.contact)
        Tools.Print(var.license)
        print("-" * 30 + "\n")

    @classmethod
    def LoadSettings(cls):
        """Loads the settings.json file and returns it."""
        settingsFile = var.settingsPath if var.settingsPath else "settings.json"

        if not os.path.exists(settingsFile):
            fallbackSettingsFile = os.path.join(
                var.filesDirectory, "default-settings.json"
            )

            # Only worth a warning when the user asked for a specific file
            if var.settingsPath:
                Tools.Warn("Configuration File Missing: {}".format(settingsFile))
                Tools.Warn("Defaulting To: {}\n".format(fallbackSettingsFile))

            settingsFile = fallbackSettingsFile

            if not os.path.exists(settingsFile):
                raise ConfigError(
                    "Backup Configuration File Missing: {}. Exiting.".format(
                        settingsFile
                    )
                )

        with open(settingsFile) as settings:
            try:
                return json.load(settings)
            except json.JSONDecodeError as error:
                raise ConfigError(
                    "Unable to read {}: {}".format(settingsFile, error)
                ) from error

    @classmethod
    def LoadJson(cls, path, errorClass=ConfigError):
        """Reads a JSON document, turning every failure into errorClass."""
        if not path or not os.path.isfile(path):
            raise errorClass("The file doesn't exist: {}".format(path))

        with open(path) as document:
            try:
                return json.load(document)
            except json.JSONDecodeError as error:
                raise errorClass("Unable to parse {}: {}".format(path, error)) from error

    @classmethod
    def ConfigHash(cls, config):
        """Stable short hash of a JSON-serializable configuration."""
        canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def ThreadCount(cls):
        """Reads the thread cap from the environment, 1 when unset."""
        value = os.environ.get(var.threadsVariable, "").strip()

        if not value:
            return 1

        try:
            threads = int(value)
        except ValueError:
            raise ConfigError(
                "{} must be a whole number, got '{}'".format(var.threadsVariable, value)
            ) from None

        if threads < 1:
            raise ConfigError(
                "{} must be at least 1, got {}".format(var.threadsVariable, threads)
            )

        return threads

    @classmethod
    def ParseRange(cls, vText, count, flag):
        """Splits 'A:B[:C]' into floats, failing with the flag's name."""
        parts = vText.split(":") if vText else []

        if len(parts) != count:
            raise ConfigError(
                "{} expects {} values separated by ':' but got '{}'".format(
                    flag, count, vText
                )
            )

        try:
            return [float(part) for part in parts]
        except ValueError as error:
            raise ConfigError("{} has a non-numeric value: {}".format(flag, vText)) from error

    @classmethod
    def MakeDirectory(cls, path):
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as error:
            raise ConfigError("Unable to create {}: {}".format(path, error)) from error

        if not os.access(path, os.W_OK):
            raise ConfigError("The output directory isn't writable: {}".format(path))

    @classmethod
    def WriteTable(cls, path, frame, meta):
        """Writes a delimited table preceded by a '#' metadata line."""
        header = "# {} {} format={} seed={} config={}\n".format(
            var.name,
            var.version,
            var.formatVersion,
            meta.get("seed"),
            meta.get("config_hash"),
        )

        with open(path, "w", newline="") as table:
            table.write(header)
            frame.to_csv(table, index=False)

        Tools.Flag("Wrote " + path)

    @classmethod
    def ReadTable(cls, path):
        return pd.read_csv(path, comment="#", float_precision="round_trip")

    ####### Message Functions #######

    @classmethod
    def Colorize(cls, vColor, vMessage):
        """Wraps a message in the ANSI code of a named color."""
        code = var.colors.get(vColor)

        if code is None:
            return vMessage

        return "\033[1;{}m{}\033[0;m".format(code, vMessage)

    @classmethod
    def Print(cls, vMessage):
        """Prints a message through the shell."""
        print(vMessage, flush=True)

    @classmethod
    def Info(cls, vMessage):
        """Used for displaying information."""
        if not var.quiet:
            cls.Print(cls.Colorize("green", "[*] ") + vMessage)

    @classmethod
    def Warn(cls, vMessage):
        """Used for warnings."""
        cls.Print(cls.Colorize("yellow", "[!] ") + vMessage)

    @classmethod
    def Flag(cls, vFlag):
        """Used for flags."""
        if not var.quiet:
            cls.Print(cls.Colorize("purple", "[+] ") + vFlag)

    @classmethod
    def Option(cls, vOption):
        """Used for options."""
        if not var.quiet:
            cls.Print(cls.Colorize("cyan", "[>] ") + vOption)

    @classmethod
    def Fail(cls, vMessage, exitCode=1):
        """Used for errors."""
        cls.Print(cls.Colorize("red", "[#] ") + vMessage)
        cls.NewLine()
        sys.exit(exitCode)

    @classmethod
    def NewLine(cls):
        """Prints empty line."""
        print("")
