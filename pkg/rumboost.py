# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import pkg.libs.Variables as var

from pkg.libs.Core import Core
from pkg.libs.Errors import RumboostError
from pkg.libs.Tools import Tools


class Main:
    @classmethod
    def start(cls, argv=None):
        args = Tools.ProcessArguments(argv)
        Tools.PrintHeader()

        try:
            config = Core.LoadSettings(args)
            Core.Run(config)
        except RumboostError as error:
            Tools.Fail(str(error), error.exitCode)

        Tools.Info("Done")

        return var.exitSuccess


if __name__ == "__main__":
    Main.start()
