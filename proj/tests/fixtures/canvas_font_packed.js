eval("Fonts = [\"monospace\", \"Arial\", \"Courier New\", \"Georgia\", \"Helvetica\", \"Times New Roman\", \"Verdana\", \"sans-serif\"]; CanvasElem = document.createElement(\"canvas\"); CanvasElem.width = \"100\"; CanvasElem.height = \"100\"; context = CanvasElem.getContext('2d'); FPDict= {}; for (var i = 0; i < Fonts.length; i++) { CanvasElem.font = Fonts[i]; FPDict[Fonts[i]] = context.measureText(\"example\").width; }")
